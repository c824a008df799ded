"""
Binary record container shared by checkpoints and dataset exports.

Layout (all integers little-endian):

    magic      8 bytes   e.g. b"SEMCKPT1"
    version    u32
    records    repeated until the trailer:
                 name length u32, UTF-8 name,
                 rank u32, extents u32 * rank,
                 payload f32 * product(extents)
    crc32      u32 over every preceding byte

Metadata rides in rank-0 records under the reserved ``meta/`` prefix.
"""

import logging
import struct
import zlib
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

from .exceptions import CheckpointError, CheckpointVersionError

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"SEMCKPT1"
DATASET_MAGIC = b"SEMDATA1"
FORMAT_VERSION = 1
META_PREFIX = "meta/"

_U32 = struct.Struct("<I")


def encode_records(
    records: Iterable[Tuple[str, np.ndarray]],
    magic: bytes = CHECKPOINT_MAGIC,
    version: int = FORMAT_VERSION,
) -> bytes:
    """
    Serialize (name, array) pairs. Arrays are stored as little-endian f32;
    names must be unique.
    """
    if len(magic) != 8:
        raise CheckpointError(f"magic must be 8 bytes, got {len(magic)}")

    out = bytearray(magic)
    out += _U32.pack(version)
    seen = set()
    for name, array in records:
        if name in seen:
            raise CheckpointError(f"duplicate record name {name!r}")
        seen.add(name)
        arr = np.asarray(array)
        encoded_name = name.encode("utf-8")
        out += _U32.pack(len(encoded_name))
        out += encoded_name
        out += _U32.pack(arr.ndim)
        for extent in arr.shape:
            out += _U32.pack(extent)
        out += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    out += _U32.pack(zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    return bytes(out)


def decode_records(
    blob: bytes,
    magic: bytes = CHECKPOINT_MAGIC,
    version: int = FORMAT_VERSION,
) -> Dict[str, np.ndarray]:
    """
    Parse a container produced by encode_records. Every failure raises before
    anything is returned, so callers never see a partial result.
    """
    if len(blob) < len(magic) + 8:
        raise CheckpointError(f"container truncated: {len(blob)} bytes")
    if blob[: len(magic)] != magic:
        raise CheckpointVersionError(magic, blob[: len(magic)], what="magic")

    body, trailer = blob[:-4], blob[-4:]
    (stored_crc,) = _U32.unpack(trailer)
    actual_crc = zlib.crc32(body) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise CheckpointError(
            f"CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}"
        )

    pos = len(magic)
    (found_version,) = _U32.unpack_from(body, pos)
    pos += 4
    if found_version != version:
        raise CheckpointVersionError(version, found_version)

    records: Dict[str, np.ndarray] = {}
    while pos < len(body):
        name_len, pos = _read_u32(body, pos)
        name_end = pos + name_len
        if name_end > len(body):
            raise CheckpointError("record name runs past end of container")
        name = body[pos:name_end].decode("utf-8")
        pos = name_end
        rank, pos = _read_u32(body, pos)
        extents = []
        for _ in range(rank):
            extent, pos = _read_u32(body, pos)
            extents.append(extent)
        count = int(np.prod(extents, dtype=np.int64)) if extents else 1
        payload_end = pos + 4 * count
        if payload_end > len(body):
            raise CheckpointError(f"payload of {name!r} runs past end of container")
        if count:
            values = np.frombuffer(body, dtype="<f4", count=count, offset=pos)
        else:
            values = np.zeros(0, dtype="<f4")
        pos = payload_end
        if name in records:
            raise CheckpointError(f"duplicate record name {name!r}")
        records[name] = values.reshape(extents).copy()
    return records


def _read_u32(body: bytes, pos: int) -> Tuple[int, int]:
    if pos + 4 > len(body):
        raise CheckpointError("container truncated inside a record header")
    (value,) = _U32.unpack_from(body, pos)
    return value, pos + 4


def meta_record(key: str, value: float = 0.0) -> Tuple[str, np.ndarray]:
    return META_PREFIX + key, np.asarray(value, dtype=np.float32)


def split_meta(records: Mapping[str, np.ndarray]) -> Tuple[Dict[str, np.ndarray], Dict[str, float]]:
    """Separate ``meta/`` records (returned as scalars) from payload records."""
    payload: Dict[str, np.ndarray] = {}
    meta: Dict[str, float] = {}
    for name, array in records.items():
        if name.startswith(META_PREFIX):
            meta[name[len(META_PREFIX):]] = float(np.asarray(array).reshape(-1)[0])
        else:
            payload[name] = array
    return payload, meta
