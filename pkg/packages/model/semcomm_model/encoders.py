"""
Desk-scale semantic encoders, one per modality. Each maps raw data to an
L×P `SemanticFeatures` matrix.

    image   stem conv -> residual blocks -> spatial positions as rows
    text    word + position + segment embeddings -> attention layers
    speech  FBank -> causal conv stack (stride 2 twice) -> linear -> attention layers
    video   tubelet embedding + positions -> (spatial block, temporal block) layers
"""

import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from semcomm_common.enums import Modality
from semcomm_common.exceptions import (
    ConfigurationError,
    DegenerateInputError,
    DimensionError,
    LookupIndexError,
)

from . import functional as F
from .attention import AttentionLayer
from .config import IMAGE_KERNEL, IMAGE_PADDING, ModelConfig, SpeechGeometry, VideoEmbeddingConfig
from .features import SemanticFeatures
from .nn import LayerNormParams, Linear, Module, embedding_normal, glorot_uniform, zeros
from .tensor import Tensor

logger = logging.getLogger(__name__)

PAD_ID = 0
UNK_ID = 1
LOG_FLOOR = 1e-10


def _conv_kernel(rng: np.random.Generator, out_ch: int, in_ch: int, *extent: int) -> Tensor:
    receptive = math.prod(extent)
    return glorot_uniform(rng, (out_ch, in_ch) + tuple(extent), in_ch * receptive, out_ch * receptive)


def _channel_norm(x: Tensor, norm: LayerNormParams) -> Tensor:
    """Layer-normalize a C×H×W map across channels at every position."""
    c, h, w = x.shape
    rows = F.reshape(F.permute(x, (1, 2, 0)), (h * w, c))
    return F.permute(F.reshape(norm(rows), (h, w, c)), (2, 0, 1))


def _stack(layers: Sequence[AttentionLayer], h: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    for layer in layers:
        h = layer(h, mask)
    return h


# ----------------------------------------------------------------------
# Task embeddings
# ----------------------------------------------------------------------


class TaskEmbeddingTable(Module):
    def __init__(self, num_tasks: int, width: int, rng: np.random.Generator) -> None:
        self.table = embedding_normal(rng, (num_tasks, width))

    @property
    def num_tasks(self) -> int:
        return self.table.shape[0]

    def row(self, task_id: int) -> Tensor:
        if not 0 <= task_id < self.num_tasks:
            raise LookupIndexError("task embedding table", task_id, self.num_tasks)
        return F.take_rows(self.table, [task_id], "task embedding table")


def append_task_embedding(f: SemanticFeatures, task_id: int, table: TaskEmbeddingTable) -> SemanticFeatures:
    """Append the task's embedding as the final row (L -> L+1)."""
    row = table.row(task_id)
    return SemanticFeatures(F.concat([f.matrix, row], axis=0), f.modality, task_id)


# ----------------------------------------------------------------------
# Image
# ----------------------------------------------------------------------


class ResidualBlock(Module):
    """conv -> norm -> GeLU -> conv, plus an identity skip (subsampled when strided)."""

    def __init__(self, channels: int, stride: int, rng: np.random.Generator, eps: float = 1e-5) -> None:
        self.stride = stride
        self.conv1 = _conv_kernel(rng, channels, channels, IMAGE_KERNEL, IMAGE_KERNEL)
        self.bias1 = zeros((channels,))
        self.norm = LayerNormParams(channels, eps)
        self.conv2 = _conv_kernel(rng, channels, channels, IMAGE_KERNEL, IMAGE_KERNEL)
        self.bias2 = zeros((channels,))

    def __call__(self, x: Tensor) -> Tensor:
        y = F.conv2d(x, self.conv1, self.bias1, stride=self.stride, padding=IMAGE_PADDING)
        y = F.gelu(_channel_norm(y, self.norm))
        y = F.conv2d(y, self.conv2, self.bias2, stride=1, padding=IMAGE_PADDING)
        skip = x if self.stride == 1 else x[:, :: self.stride, :: self.stride]
        return F.add(y, skip)


class ImageEncoder(Module):
    modality = Modality.IMAGE

    def __init__(self, config: ModelConfig, rng: np.random.Generator) -> None:
        geo = config.image
        self.geometry = geo
        channels = geo.conv_channels or config.width
        self.stem = _conv_kernel(rng, channels, geo.channels, IMAGE_KERNEL, IMAGE_KERNEL)
        self.stem_bias = zeros((channels,))
        self.blocks = [ResidualBlock(channels, s, rng, config.layer_norm_eps) for s in geo.block_strides]
        self.projection = Linear(channels, config.width, rng) if channels != config.width else None

    def __call__(self, image: Tensor, task_id: int = 0) -> SemanticFeatures:
        geo = self.geometry
        expected = (geo.channels, geo.height, geo.width)
        if image.shape != expected:
            raise DimensionError("encode_image", image.shape, expected)
        x = F.conv2d(image, self.stem, self.stem_bias, stride=geo.stem_stride, padding=IMAGE_PADDING)
        for block in self.blocks:
            x = block(x)
        c, h, w = x.shape
        rows = F.reshape(F.permute(x, (1, 2, 0)), (h * w, c))
        if self.projection is not None:
            rows = self.projection(rows)
        return SemanticFeatures(rows, Modality.IMAGE, task_id)


# ----------------------------------------------------------------------
# Text
# ----------------------------------------------------------------------


def build_vocab(words: Sequence[str]) -> Dict[str, int]:
    """Whole-word vocabulary; ids 0 and 1 are reserved for padding and unknown words."""
    vocab: Dict[str, int] = {}
    for word in words:
        if word not in vocab:
            vocab[word] = len(vocab) + 2
    return vocab


def tokenize(text: Sequence[str], vocab: Mapping[str, int], seq_len: int) -> List[int]:
    """Map words to ids, truncate to seq_len, right-pad with PAD_ID."""
    ids = [vocab.get(word, UNK_ID) for word in text[:seq_len]]
    return ids + [PAD_ID] * (seq_len - len(ids))


class TextEncoder(Module):
    modality = Modality.TEXT

    def __init__(self, config: ModelConfig, rng: np.random.Generator) -> None:
        geo = config.text
        p = config.width
        self.word_table = embedding_normal(rng, (geo.vocab_size, p))
        self.position_table = embedding_normal(rng, (geo.seq_len, p))
        self.segment_table = embedding_normal(rng, (geo.segments, p))
        self.layers = [
            AttentionLayer(p, config.encoder_heads, rng, scale_mode=config.encoder_scale, eps=config.layer_norm_eps)
            for _ in range(config.encoder_layers)
        ]

    def input_embeddings(self, ids: Sequence[int], segment_ids: Optional[Sequence[int]] = None) -> Tensor:
        """E_in = E_word + E_position + E_segment."""
        if len(ids) < 1:
            raise DegenerateInputError("encode_text needs at least one token")
        if segment_ids is None:
            segment_ids = [0] * len(ids)
        if len(segment_ids) != len(ids):
            raise DimensionError("encode_text segments", (len(ids),), (len(segment_ids),))
        words = F.take_rows(self.word_table, ids, "word table")
        positions = F.take_rows(self.position_table, range(len(ids)), "position table")
        segments = F.take_rows(self.segment_table, segment_ids, "segment table")
        return F.add(F.add(words, positions), segments)

    def __call__(
        self, ids: Sequence[int], segment_ids: Optional[Sequence[int]] = None, task_id: int = 0
    ) -> SemanticFeatures:
        h = _stack(self.layers, self.input_embeddings(ids, segment_ids))
        return SemanticFeatures(h, Modality.TEXT, task_id)


# ----------------------------------------------------------------------
# Speech
# ----------------------------------------------------------------------


def _hz_to_mel(hz: np.ndarray) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + hz / 700.0)


def _mel_to_hz(mel: np.ndarray) -> np.ndarray:
    return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)


def mel_filter_bins(n_filters: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """FFT bin of every triangle edge/center: n_filters + 2 strictly increasing ints."""
    mels = np.linspace(_hz_to_mel(np.asarray(0.0)), _hz_to_mel(np.asarray(sample_rate / 2.0)), n_filters + 2)
    bins = np.floor((n_fft + 1) * _mel_to_hz(mels) / sample_rate).astype(np.int64)
    bins = np.minimum(bins, n_fft // 2)
    if np.any(np.diff(bins) < 1):
        raise ConfigurationError(
            f"{n_filters} mel filters collapse onto shared FFT bins for frame {n_fft}", field="speech.n_filters"
        )
    return bins


def mel_filterbank(n_filters: int, n_fft: int, sample_rate: int) -> np.ndarray:
    bins = mel_filter_bins(n_filters, n_fft, sample_rate)
    bank = np.zeros((n_filters, n_fft // 2 + 1))
    for k in range(1, n_filters + 1):
        left, center, right = bins[k - 1], bins[k], bins[k + 1]
        for b in range(left, center):
            bank[k - 1, b] = (b - left) / (center - left)
        for b in range(center, right):
            bank[k - 1, b] = (right - b) / (right - center)
    return bank


def compute_fbank(
    waveform: np.ndarray,
    n_filters: int = 16,
    frame: int = 256,
    hop: int = 128,
    sample_rate: int = 8000,
) -> Tensor:
    """
    Log mel-filterbank energies, one row per frame:
    T = floor((T_raw - frame) / hop) + 1. Energies are floored at LOG_FLOOR before the log.
    """
    wave = np.asarray(waveform, dtype=np.float64).reshape(-1)
    if wave.size < frame:
        raise DegenerateInputError(f"waveform of {wave.size} samples is shorter than one frame ({frame})")
    frames = np.lib.stride_tricks.sliding_window_view(wave, frame)[::hop]
    spectrum = np.abs(np.fft.rfft(frames * np.hanning(frame), axis=1)) ** 2
    energies = spectrum @ mel_filterbank(n_filters, frame, sample_rate).T
    return Tensor(np.log(np.maximum(energies, LOG_FLOOR)))


def fbank_for(waveform: np.ndarray, geometry: SpeechGeometry) -> Tensor:
    return compute_fbank(waveform, geometry.n_filters, geometry.frame, geometry.hop, geometry.sample_rate)


class SpeechEncoder(Module):
    modality = Modality.SPEECH

    def __init__(self, config: ModelConfig, rng: np.random.Generator) -> None:
        geo = config.speech
        p = config.width
        self.geometry = geo
        self.conv1 = _conv_kernel(rng, p, geo.n_filters, geo.kernel_width)
        self.bias1 = zeros((p,))
        self.conv2 = _conv_kernel(rng, p, p, geo.kernel_width)
        self.bias2 = zeros((p,))
        self.projection = Linear(p, p, rng)
        self.layers = [
            AttentionLayer(p, config.encoder_heads, rng, scale_mode=config.encoder_scale, eps=config.layer_norm_eps)
            for _ in range(config.encoder_layers)
        ]

    def conv_stack(self, fbank: Tensor) -> Tensor:
        """Two causal conv + GeLU layers, each downsampling time by the configured stride."""
        s = self.geometry.downsample
        x = F.gelu(F.causal_conv1d(fbank, self.conv1, self.bias1, stride=s))
        return F.gelu(F.causal_conv1d(x, self.conv2, self.bias2, stride=s))

    def __call__(self, fbank: Tensor, task_id: int = 0) -> SemanticFeatures:
        if fbank.ndim != 2 or fbank.shape[0] < 1 or fbank.shape[1] != self.geometry.n_filters:
            raise DimensionError("encode_speech", fbank.shape, (None, self.geometry.n_filters))
        h = self.projection(self.conv_stack(fbank))
        return SemanticFeatures(_stack(self.layers, h), Modality.SPEECH, task_id)


# ----------------------------------------------------------------------
# Video
# ----------------------------------------------------------------------


def tubelet_tokens(video: Tensor, cfg: VideoEmbeddingConfig) -> Tensor:
    """
    Partition N_F×C×H×W into disjoint N_f×C×h×w tubes and flatten each.
    Token order is (time, row, column) with time slowest.
    """
    cfg.check()
    expected = (cfg.frames, cfg.channels, cfg.height, cfg.width)
    if video.shape != expected:
        raise DimensionError("tubelet_embed", video.shape, expected)
    grid = F.reshape(
        video,
        (cfg.n_f, cfg.tube_frames, cfg.channels, cfg.n_h, cfg.tube_height, cfg.n_w, cfg.tube_width),
    )
    tubes = F.permute(grid, (0, 3, 5, 1, 2, 4, 6))
    return F.reshape(tubes, (cfg.sequence_length, cfg.tube_size))


def tubelet_index(cfg: VideoEmbeddingConfig) -> np.ndarray:
    """Token id owning every voxel, shaped like the video."""
    cfg.check()
    t = np.arange(cfg.frames)[:, None, None, None] // cfg.tube_frames
    i = np.arange(cfg.height)[None, None, :, None] // cfg.tube_height
    j = np.arange(cfg.width)[None, None, None, :] // cfg.tube_width
    owner = (t * cfg.n_h + i) * cfg.n_w + j
    return np.broadcast_to(owner, (cfg.frames, cfg.channels, cfg.height, cfg.width)).copy()


def tubelet_embed(video: Tensor, cfg: VideoEmbeddingConfig, projection: Linear, positions: Tensor) -> Tensor:
    """Shared linear projection of every tube, plus per-token position embeddings."""
    return F.add(projection(tubelet_tokens(video, cfg)), positions)


def token_coordinates(cfg: VideoEmbeddingConfig) -> Tuple[np.ndarray, np.ndarray]:
    """(temporal index, spatial index) of every token."""
    tokens = np.arange(cfg.sequence_length)
    spatial = cfg.n_h * cfg.n_w
    return tokens // spatial, tokens % spatial


def block_masks(cfg: VideoEmbeddingConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Masks for the (first, second) attention block of every video layer."""
    t, r = token_coordinates(cfg)
    same_time = t[:, None] == t[None, :]
    same_space = r[:, None] == r[None, :]
    if cfg.spatial_block_groups_by == "time":
        return same_time, same_space
    return same_space, same_time


class VideoEncoder(Module):
    modality = Modality.VIDEO

    def __init__(self, config: ModelConfig, rng: np.random.Generator) -> None:
        cfg = config.video
        cfg.check()
        p = config.width
        self.config = cfg
        self.projection = Linear(cfg.tube_size, p, rng)
        self.positions = embedding_normal(rng, (cfg.sequence_length, p))
        self.spatial_layers = [
            AttentionLayer(p, config.encoder_heads, rng, scale_mode=config.encoder_scale, eps=config.layer_norm_eps)
            for _ in range(config.encoder_layers)
        ]
        self.temporal_layers = [
            AttentionLayer(p, config.encoder_heads, rng, scale_mode=config.encoder_scale, eps=config.layer_norm_eps)
            for _ in range(config.encoder_layers)
        ]

    def __call__(self, video: Tensor, task_id: int = 0) -> SemanticFeatures:
        h = tubelet_embed(video, self.config, self.projection, self.positions)
        first, second = block_masks(self.config)
        for spatial, temporal in zip(self.spatial_layers, self.temporal_layers):
            h = temporal(spatial(h, first), second)
        return SemanticFeatures(h, Modality.VIDEO, task_id)


def encode_image(encoder: ImageEncoder, image: Tensor, task_id: int = 0) -> SemanticFeatures:
    return encoder(image, task_id)


def encode_text(
    encoder: TextEncoder, ids: Sequence[int], segment_ids: Optional[Sequence[int]] = None, task_id: int = 0
) -> SemanticFeatures:
    return encoder(ids, segment_ids, task_id)


def encode_speech(encoder: SpeechEncoder, fbank: Tensor, task_id: int = 0) -> SemanticFeatures:
    return encoder(fbank, task_id)


def encode_video(encoder: VideoEncoder, video: Tensor, task_id: int = 0) -> SemanticFeatures:
    return encoder(video, task_id)


def build_encoders(config: ModelConfig, modalities: Sequence[Modality], rng: np.random.Generator) -> Dict[Modality, Module]:
    factories = {
        Modality.IMAGE: ImageEncoder,
        Modality.TEXT: TextEncoder,
        Modality.SPEECH: SpeechEncoder,
        Modality.VIDEO: VideoEncoder,
    }
    return {m: factories[m](config, rng) for m in Modality if m in modalities}
