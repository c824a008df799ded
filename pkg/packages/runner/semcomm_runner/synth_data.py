"""
Deterministic synthetic datasets, one generator per DatasetKind.

Every generator is a pure function of its DatasetSpec: the same (kind, size,
seed, geometry) always yields bit-identical samples. Class labels are drawn
uniformly, and the noise stays far below each decision margin.
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np
from pydantic import Field

from semcomm_common.base_model import FrozenModel
from semcomm_common.container import DATASET_MAGIC, decode_records, encode_records, meta_record, split_meta
from semcomm_common.enums import DatasetKind, Modality
from semcomm_common.exceptions import CheckpointError, ConfigurationError
from semcomm_model.config import ImageGeometry, SpeechGeometry, TextGeometry, VideoEmbeddingConfig
from semcomm_model.encoders import PAD_ID, build_vocab, tokenize

logger = logging.getLogger(__name__)

BACKGROUND = 0.1
BRIGHT = 0.9
PIXEL_NOISE = 0.03
TONE_AMPLITUDE = 0.5
TONE_NOISE = 0.01
DOT = 2
# first vocabulary id after pad and unknown
FIRST_WORD = PAD_ID + 2


class DatasetSpec(FrozenModel):
    kind: DatasetKind
    size: int = Field(500, ge=1)
    seed: int = 0
    image: ImageGeometry = Field(default_factory=ImageGeometry)
    text: TextGeometry = Field(default_factory=TextGeometry)
    speech: SpeechGeometry = Field(default_factory=SpeechGeometry)
    video: VideoEmbeddingConfig = Field(default_factory=VideoEmbeddingConfig)
    speech_vocab: int = Field(4, ge=1)
    max_label_len: int = Field(4, ge=1)

    def check(self) -> None:
        """Reject geometry the generators or encoders cannot honour."""
        self.video.check()
        if self.image.height % 2 or self.image.width % 2:
            raise ConfigurationError("image extents must be even to split into halves and quadrants", field="image")
        if self.text.vocab_size < FIRST_WORD + 4:
            raise ConfigurationError("vocabulary too small for the text generators", field="text.vocab_size")
        if self.speech.raw_len < self.speech.frame:
            raise ConfigurationError("speech raw_len shorter than one frame", field="speech.raw_len")
        top = self.speech_vocab * self.speech.sample_rate / (2 * (self.speech_vocab + 1))
        if top >= self.speech.sample_rate / 2:
            raise ConfigurationError("tone frequencies exceed Nyquist", field="speech_vocab")
        if self.video.frames - 1 + DOT > min(self.video.height, self.video.width):
            raise ConfigurationError("video frames too many for the dot to stay in view", field="video.frames")


@dataclass
class Sample:
    inputs: Dict[Modality, Any]
    label: Any
    extras: Dict[str, Any] = field(default_factory=dict)


# ----------------------------------------------------------------------
# Building blocks
# ----------------------------------------------------------------------


def _canvas(rng: np.random.Generator, geo: ImageGeometry) -> np.ndarray:
    return BACKGROUND + rng.normal(0.0, PIXEL_NOISE, size=(geo.channels, geo.height, geo.width))


def quadrant_slices(geo: ImageGeometry, quadrant: int) -> Tuple[slice, slice]:
    """0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right."""
    h, w = geo.height // 2, geo.width // 2
    rows = slice(0, h) if quadrant < 2 else slice(h, geo.height)
    cols = slice(0, w) if quadrant % 2 == 0 else slice(w, geo.width)
    return rows, cols


def half_slice(geo: ImageGeometry, right: int) -> slice:
    w = geo.width // 2
    return slice(w, geo.width) if right else slice(0, w)


def _vocabulary(geo: TextGeometry) -> Dict[str, int]:
    return build_vocab([f"w{i}" for i in range(FIRST_WORD, geo.vocab_size)])


def _ids(words: Sequence[str], geo: TextGeometry) -> np.ndarray:
    return np.asarray(tokenize(words, _vocabulary(geo), geo.seq_len), dtype=np.int64)


def _words(ids: Sequence[int]) -> List[str]:
    return [f"w{i}" for i in ids]


def tone_frequency(symbol: int, vocab: int, sample_rate: int) -> float:
    return (symbol + 1) * sample_rate / (2 * (vocab + 1))


# ----------------------------------------------------------------------
# Generators
# ----------------------------------------------------------------------


def _img_class(spec: DatasetSpec, rng: np.random.Generator) -> Sample:
    label = int(rng.integers(4))
    image = _canvas(rng, spec.image)
    rows, cols = quadrant_slices(spec.image, label)
    image[:, rows, cols] += BRIGHT - BACKGROUND
    return Sample({Modality.IMAGE: image}, label)


def _img_recon(spec: DatasetSpec, rng: np.random.Generator) -> Sample:
    geo = spec.image
    image = np.zeros((geo.channels, geo.height, geo.width))
    for _ in range(int(rng.integers(1, 4))):
        top, left = int(rng.integers(geo.height - 1)), int(rng.integers(geo.width - 1))
        bottom = int(rng.integers(top + 1, geo.height + 1))
        right = int(rng.integers(left + 1, geo.width + 1))
        image[:, top:bottom, left:right] = BRIGHT
    return Sample({Modality.IMAGE: image}, image.copy())


def _text_class(spec: DatasetSpec, rng: np.random.Generator) -> Sample:
    geo = spec.text
    words = np.arange(FIRST_WORD, geo.vocab_size)
    positive, negative = np.array_split(words, 2)
    label = int(rng.integers(2))
    n = geo.seq_len
    # label 1 iff positive words strictly outnumber negative ones
    k = int(rng.integers(n // 2 + 1, n + 1)) if label else int(rng.integers(0, n // 2 + 1))
    ids = np.concatenate([rng.choice(positive, size=k), rng.choice(negative, size=n - k)])
    rng.shuffle(ids)
    return Sample({Modality.TEXT: _ids(_words(ids), geo)}, label)


def _text_recon(spec: DatasetSpec, rng: np.random.Generator) -> Sample:
    geo = spec.text
    ids = _ids(_words(rng.integers(FIRST_WORD, geo.vocab_size, size=geo.seq_len)), geo)
    return Sample({Modality.TEXT: ids}, ids.tolist())


def _speech_rec(spec: DatasetSpec, rng: np.random.Generator) -> Sample:
    geo = spec.speech
    length = int(rng.integers(1, spec.max_label_len + 1))
    label = rng.integers(spec.speech_vocab, size=length).tolist()
    bounds = np.linspace(0, geo.raw_len, length + 1).astype(np.int64)
    t = np.arange(geo.raw_len) / geo.sample_rate
    wave = np.zeros(geo.raw_len)
    for symbol, start, stop in zip(label, bounds[:-1], bounds[1:]):
        freq = tone_frequency(symbol, spec.speech_vocab, geo.sample_rate)
        wave[start:stop] = TONE_AMPLITUDE * np.sin(2.0 * np.pi * freq * t[start:stop])
    wave += rng.normal(0.0, TONE_NOISE, size=geo.raw_len)
    return Sample({Modality.SPEECH: wave}, label)


# direction -> (d_row, d_col): right, left, down, up
DIRECTIONS = ((0, 1), (0, -1), (1, 0), (-1, 0))


def _video_class(spec: DatasetSpec, rng: np.random.Generator) -> Sample:
    geo = spec.video
    label = int(rng.integers(4))
    d_row, d_col = DIRECTIONS[label]
    travel = geo.frames - 1

    def start(extent: int, step: int) -> int:
        if step > 0:
            return int(rng.integers(0, extent - DOT - travel + 1))
        if step < 0:
            return int(rng.integers(travel, extent - DOT + 1))
        return int(rng.integers(0, extent - DOT + 1))

    row, col = start(geo.height, d_row), start(geo.width, d_col)
    video = BACKGROUND + rng.normal(0.0, PIXEL_NOISE, size=(geo.frames, geo.channels, geo.height, geo.width))
    for f in range(geo.frames):
        r, c = row + f * d_row, col + f * d_col
        video[f, :, r : r + DOT, c : c + DOT] = BRIGHT
    return Sample({Modality.VIDEO: video}, label)


def _mm_xor(spec: DatasetSpec, rng: np.random.Generator) -> Sample:
    a, b = int(rng.integers(2)), int(rng.integers(2))
    image = _canvas(rng, spec.image)
    image[:, :, half_slice(spec.image, a)] += BRIGHT - BACKGROUND
    geo = spec.text
    ids = rng.integers(FIRST_WORD, geo.vocab_size, size=geo.seq_len)
    # the first word's id parity carries bit b
    choices = np.arange(FIRST_WORD, geo.vocab_size)
    ids[0] = rng.choice(choices[choices % 2 == b])
    text = _ids(_words(ids), geo)
    return Sample({Modality.IMAGE: image, Modality.TEXT: text}, a ^ b, {"a": a, "b": b})


def _mm_multilabel(spec: DatasetSpec, rng: np.random.Generator) -> Sample:
    q0, q1, marker = (int(x) for x in rng.integers(2, size=3))
    image = _canvas(rng, spec.image)
    for quadrant, on in ((0, q0), (1, q1)):
        if on:
            rows, cols = quadrant_slices(spec.image, quadrant)
            image[:, rows, cols] += BRIGHT - BACKGROUND
    geo = spec.text
    ids = rng.integers(FIRST_WORD + 1, geo.vocab_size, size=geo.seq_len)
    if marker:
        ids[int(rng.integers(geo.seq_len))] = FIRST_WORD
    text = _ids(_words(ids), geo)
    return Sample({Modality.IMAGE: image, Modality.TEXT: text}, [q0, q1, marker, q0 & marker])


GENERATORS: Dict[DatasetKind, Callable[[DatasetSpec, np.random.Generator], Sample]] = {
    DatasetKind.IMG_CLASS: _img_class,
    DatasetKind.IMG_RECON: _img_recon,
    DatasetKind.TEXT_CLASS: _text_class,
    DatasetKind.TEXT_RECON: _text_recon,
    DatasetKind.SPEECH_REC: _speech_rec,
    DatasetKind.VIDEO_CLASS: _video_class,
    DatasetKind.MM_XOR: _mm_xor,
    DatasetKind.MM_MULTILABEL: _mm_multilabel,
}


def gen_dataset(spec: DatasetSpec) -> List[Sample]:
    spec.check()
    rng = np.random.default_rng(spec.seed)
    generator = GENERATORS[spec.kind]
    samples = [generator(spec, rng) for _ in range(spec.size)]
    logger.debug("generated %d %s samples (seed %d)", len(samples), spec.kind.value, spec.seed)
    return samples


def split(dataset: Sequence[Sample], train_fraction: float, seed: int) -> Tuple[List[Sample], List[Sample]]:
    """Deterministic shuffle-split into disjoint, exhaustive train and eval pools."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigurationError(f"train fraction must be in (0, 1), got {train_fraction}", field="train_fraction")
    n = len(dataset)
    n_train = int(round(n * train_fraction))
    if n_train == 0 or n_train == n:
        raise ConfigurationError(f"splitting {n} samples at {train_fraction} leaves one side empty", field="train_fraction")
    order = np.random.default_rng(seed).permutation(n)
    return [dataset[i] for i in order[:n_train]], [dataset[i] for i in order[n_train:]]


def batch(pool: Sequence[Sample], batch_size: int) -> List[List[Sample]]:
    """Consecutive non-overlapping batches; the last one may be partial."""
    if batch_size < 1:
        raise ConfigurationError(f"batch size must be ≥ 1, got {batch_size}", field="batch_size")
    return [list(pool[i : i + batch_size]) for i in range(0, len(pool), batch_size)]


# ----------------------------------------------------------------------
# Container export
# ----------------------------------------------------------------------

_RECORD = re.compile(r"^sample/(\d+)/(\w+)$")
_SEQUENCE_LABELS = {DatasetKind.TEXT_RECON, DatasetKind.SPEECH_REC, DatasetKind.MM_MULTILABEL}


def export_dataset(samples: Sequence[Sample], kind: DatasetKind) -> bytes:
    """Samples as records named sample/<i>/<field>; values are stored as f32."""
    records: List[Tuple[str, np.ndarray]] = [
        meta_record(f"kind:{kind.value}", 1.0),
        meta_record("size", float(len(samples))),
    ]
    for i, sample in enumerate(samples):
        for modality, payload in sample.inputs.items():
            records.append((f"sample/{i}/{modality.value}", np.asarray(payload)))
        records.append((f"sample/{i}/label", np.asarray(sample.label)))
    return encode_records(records, magic=DATASET_MAGIC)


def import_dataset(blob: bytes) -> Tuple[DatasetKind, List[Sample]]:
    payload, meta = split_meta(decode_records(blob, magic=DATASET_MAGIC))
    kinds = [key.split(":", 1)[1] for key in meta if key.startswith("kind:")]
    if len(kinds) != 1 or "size" not in meta:
        raise CheckpointError("dataset container lacks its kind or size metadata")
    kind = DatasetKind(kinds[0])
    size = int(meta["size"])
    fields: List[Dict[str, np.ndarray]] = [{} for _ in range(size)]
    for name, array in payload.items():
        match = _RECORD.match(name)
        if match is None or int(match.group(1)) >= size:
            raise CheckpointError(f"unexpected dataset record {name!r}")
        fields[int(match.group(1))][match.group(2)] = array
    samples = []
    for i, entry in enumerate(fields):
        if "label" not in entry:
            raise CheckpointError(f"sample {i} has no label record")
        label = entry.pop("label")
        inputs = {Modality(key): _restore_payload(Modality(key), value) for key, value in entry.items()}
        samples.append(Sample(inputs, _restore_label(kind, label)))
    return kind, samples


def _restore_payload(modality: Modality, value: np.ndarray) -> Any:
    if modality is Modality.TEXT:
        return value.astype(np.int64)
    return value.astype(np.float64)


def _restore_label(kind: DatasetKind, value: np.ndarray) -> Any:
    if kind is DatasetKind.IMG_RECON:
        return value.astype(np.float64)
    if kind in _SEQUENCE_LABELS:
        return [int(x) for x in value.reshape(-1)]
    return int(value)
