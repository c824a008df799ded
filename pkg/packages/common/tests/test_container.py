"""Tests for the binary record container"""

import struct

import numpy as np
import pytest

from semcomm_common.container import (
    CHECKPOINT_MAGIC,
    DATASET_MAGIC,
    decode_records,
    encode_records,
    meta_record,
    split_meta,
)
from semcomm_common.exceptions import CheckpointError, CheckpointVersionError


def _records():
    return [
        ("encoder/weight", np.arange(6, dtype=np.float64).reshape(2, 3)),
        ("encoder/bias", np.array([0.5, -0.25])),
        meta_record("step", 12.0),
    ]


class TestEncodeDecode:
    """Test suite for container framing"""

    def test_layout_header(self):
        """Test magic and version lead the container and a CRC trails it"""
        blob = encode_records(_records())

        assert blob[:8] == CHECKPOINT_MAGIC
        assert struct.unpack("<I", blob[8:12])[0] == 1
        assert len(blob) > 12 + 4

    def test_round_trip_values_and_shapes(self):
        """Test decoded arrays keep names, shapes and f32 values"""
        decoded = decode_records(encode_records(_records()))

        assert list(decoded) == ["encoder/weight", "encoder/bias", "meta/step"]
        np.testing.assert_array_equal(decoded["encoder/weight"], np.arange(6).reshape(2, 3))
        assert decoded["encoder/bias"].dtype == np.float32
        assert decoded["meta/step"].shape == ()

    def test_reencode_is_byte_identical(self):
        """Test decode then encode reproduces the same bytes"""
        blob = encode_records(_records())
        again = encode_records(decode_records(blob).items())

        assert again == blob

    def test_empty_array_record(self):
        """Test zero-sized arrays survive the trip"""
        decoded = decode_records(encode_records([("empty", np.zeros((0, 3)))]))

        assert decoded["empty"].shape == (0, 3)

    def test_duplicate_names_rejected(self):
        """Test duplicate record names are refused at encode time"""
        with pytest.raises(CheckpointError, match="duplicate"):
            encode_records([("a", np.ones(1)), ("a", np.zeros(1))])


class TestCorruption:
    """Test suite for damaged containers"""

    def test_wrong_magic(self):
        """Test a dataset container is not accepted as a checkpoint"""
        blob = encode_records(_records(), magic=DATASET_MAGIC)

        with pytest.raises(CheckpointVersionError) as exc:
            decode_records(blob, magic=CHECKPOINT_MAGIC)
        assert exc.value.what == "magic"

    def test_wrong_version(self):
        """Test a version mismatch raises a version error"""
        blob = encode_records(_records(), version=2)

        with pytest.raises(CheckpointVersionError):
            decode_records(blob)

    def test_flipped_byte_fails_crc(self):
        """Test any flipped payload byte is caught by the CRC"""
        blob = bytearray(encode_records(_records()))
        blob[20] ^= 0xFF

        with pytest.raises(CheckpointError, match="CRC"):
            decode_records(bytes(blob))

    def test_truncated(self):
        """Test truncated containers raise instead of returning a partial map"""
        blob = encode_records(_records())

        with pytest.raises(CheckpointError):
            decode_records(blob[: len(blob) // 2])
        with pytest.raises(CheckpointError):
            decode_records(blob[:10])


class TestMetaRecords:
    """Test suite for the meta/ namespace"""

    def test_split_meta(self):
        """Test meta records come back as scalars keyed without the prefix"""
        payload, meta = split_meta(decode_records(encode_records(_records())))

        assert set(payload) == {"encoder/weight", "encoder/bias"}
        assert meta == {"step": 12.0}
