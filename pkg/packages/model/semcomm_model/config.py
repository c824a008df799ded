import math
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Tuple

from pydantic import Field, field_validator

from semcomm_common.base_model import BaseModel, FrozenModel
from semcomm_common.enums import (
    ChannelKind,
    HeadKind,
    LossKind,
    MetricKind,
    Modality,
)
from semcomm_common.exceptions import ConfigurationError, LookupIndexError

# Image encoder convolutions are 3×3 with padding 1.
IMAGE_KERNEL = 3
IMAGE_PADDING = 1


def _conv_out(size: int, stride: int, kernel: int = IMAGE_KERNEL, padding: int = IMAGE_PADDING) -> int:
    return (size + 2 * padding - kernel) // stride + 1


class ImageGeometry(FrozenModel):
    channels: int = 3
    height: int = 16
    width: int = 16
    stem_stride: int = 2
    block_strides: Tuple[int, ...] = (1, 2)
    conv_channels: Optional[int] = Field(
        None, description="Feature-map channels; defaults to the model width P."
    )

    def feature_map(self) -> Tuple[int, int]:
        h = _conv_out(self.height, self.stem_stride)
        w = _conv_out(self.width, self.stem_stride)
        for stride in self.block_strides:
            h, w = _conv_out(h, stride), _conv_out(w, stride)
        return h, w

    @property
    def sequence_length(self) -> int:
        h, w = self.feature_map()
        return h * w


class TextGeometry(FrozenModel):
    vocab_size: int = 32
    seq_len: int = 8
    segments: int = 2


class SpeechGeometry(FrozenModel):
    sample_rate: int = 8000
    frame: int = 256
    hop: int = 128
    n_filters: int = 16
    raw_len: int = 4224
    kernel_width: int = 3
    downsample: int = 2

    @property
    def frames(self) -> int:
        return (self.raw_len - self.frame) // self.hop + 1

    @property
    def sequence_length(self) -> int:
        # two stride-2 causal layers
        return math.ceil(math.ceil(self.frames / self.downsample) / self.downsample)


class VideoEmbeddingConfig(FrozenModel):
    frames: int = 8
    channels: int = 3
    height: int = 16
    width: int = 16
    tube_frames: int = 2
    tube_height: int = 8
    tube_width: int = 8
    spatial_block_groups_by: Literal["time", "space"] = Field(
        "time",
        description="Token grouping of the first (spatial) attention block of each layer. "
        "'time' attends among tokens of the same temporal index; 'space' swaps the two masks.",
    )

    def check(self) -> None:
        pairs = [
            ("frames", self.frames, self.tube_frames),
            ("height", self.height, self.tube_height),
            ("width", self.width, self.tube_width),
        ]
        for field, total, part in pairs:
            if part < 1 or total % part != 0:
                raise ConfigurationError(f"{total} is not divisible by tube extent {part}", field=f"video.{field}")

    @property
    def n_f(self) -> int:
        return self.frames // self.tube_frames

    @property
    def n_h(self) -> int:
        return self.height // self.tube_height

    @property
    def n_w(self) -> int:
        return self.width // self.tube_width

    @property
    def sequence_length(self) -> int:
        return self.n_f * self.n_h * self.n_w

    @property
    def tube_size(self) -> int:
        return self.tube_frames * self.channels * self.tube_height * self.tube_width


class FusionConfig(FrozenModel):
    num_layers: int = Field(6, ge=1)
    num_heads: int = 12
    fallback_heads: int = 4
    attention_scale: Literal["width", "head"] = Field(
        "width", description="'width' divides scores by sqrt(P); 'head' by sqrt(P/h)."
    )
    ffn_ratio: int = 4


class ModelConfig(BaseModel):
    width: int = Field(64, description="Global feature width P.")
    compressed_width: Optional[int] = Field(None, description="Channel symbol width d; defaults to P/2.")
    encoder_layers: int = 2
    encoder_heads: int = 4
    encoder_scale: Literal["width", "head"] = "width"
    layer_norm_eps: float = 1e-5
    image: ImageGeometry = Field(default_factory=ImageGeometry)
    text: TextGeometry = Field(default_factory=TextGeometry)
    speech: SpeechGeometry = Field(default_factory=SpeechGeometry)
    video: VideoEmbeddingConfig = Field(default_factory=VideoEmbeddingConfig)
    fusion: FusionConfig = Field(default_factory=FusionConfig)

    @property
    def d(self) -> int:
        return self.compressed_width if self.compressed_width is not None else self.width // 2

    def sequence_length(self, modality: Modality) -> int:
        lengths = {
            Modality.IMAGE: self.image.sequence_length,
            Modality.TEXT: self.text.seq_len,
            Modality.SPEECH: self.speech.sequence_length,
            Modality.VIDEO: self.video.sequence_length,
        }
        return lengths[modality]

    def validate_consistency(self) -> None:
        """Reject every geometry the encoders would reject at run time."""
        p = self.width
        if p < 2 or p % 2:
            raise ConfigurationError(f"P must be even and ≥ 2, got {p}", field="width")
        if not 1 <= self.d < p:
            raise ConfigurationError(f"compressed width d={self.d} must satisfy 1 ≤ d < P={p}", field="compressed_width")
        if p % self.encoder_heads:
            raise ConfigurationError(f"P={p} not divisible by encoder heads {self.encoder_heads}", field="encoder_heads")
        if p % self.fusion.num_heads and p % self.fusion.fallback_heads:
            raise ConfigurationError(
                f"P={p} divisible by neither {self.fusion.num_heads} nor {self.fusion.fallback_heads} heads",
                field="fusion.num_heads",
            )
        self.video.check()
        if min(self.image.feature_map()) < 1:
            raise ConfigurationError("image strides shrink the feature map to nothing", field="image")
        if self.speech.raw_len < self.speech.frame:
            raise ConfigurationError("speech raw_len shorter than one frame", field="speech.raw_len")
        if self.speech.n_filters < 2 or self.speech.frame // 2 + 1 < self.speech.n_filters + 2:
            raise ConfigurationError("too many mel filters for the frame size", field="speech.n_filters")
        if self.text.vocab_size < 3:
            raise ConfigurationError("vocabulary needs pad, unknown and at least one word", field="text.vocab_size")


class ChannelConfig(FrozenModel):
    kind: ChannelKind = ChannelKind.AWGN
    snr_db: float = 18.0
    seed: int = 0
    equalize: bool = True

    @field_validator("snr_db")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("snr_db must be finite")
        return value


# head -> loss -> allowed metrics
_CONSISTENT: Dict[HeadKind, Dict[LossKind, Tuple[MetricKind, ...]]] = {
    HeadKind.CLASS_VEC: {
        LossKind.CROSS_ENTROPY: (MetricKind.ACCURACY,),
        LossKind.BINARY_CROSS_ENTROPY: (MetricKind.F1,),
    },
    HeadKind.CLASS_SEQ: {
        LossKind.CROSS_ENTROPY: (MetricKind.BLEU, MetricKind.ACCURACY),
        LossKind.CTC: (MetricKind.WORD_ACCURACY,),
    },
    HeadKind.RECON_IMAGE: {LossKind.MSE: (MetricKind.PSNR,)},
    HeadKind.RECON_SEQ: {LossKind.MSE: (MetricKind.PSNR,)},
}


class TaskSpec(FrozenModel):
    id: int = Field(..., ge=0)
    name: str
    modalities: Tuple[Modality, ...]
    head: HeadKind
    loss: LossKind
    metric: MetricKind
    num_outputs: int = Field(
        ...,
        ge=1,
        description="Classes, labels, vocabulary size (CTC: symbols without blank) or values per row.",
    )
    hidden: Optional[int] = Field(None, description="Width of the optional first head layer.")
    image_shape: Optional[Tuple[int, int, int]] = None
    max_val: float = 1.0

    @field_validator("modalities")
    @classmethod
    def _non_empty(cls, value: Tuple[Modality, ...]) -> Tuple[Modality, ...]:
        if not value:
            raise ValueError("a task needs at least one modality")
        if len(set(value)) != len(value):
            raise ValueError("modalities must be distinct")
        return value

    @property
    def multimodal(self) -> bool:
        return len(self.modalities) > 1

    def check_consistency(self) -> None:
        losses = _CONSISTENT[self.head]
        if self.loss not in losses or self.metric not in losses[self.loss]:
            raise ConfigurationError(
                f"head {self.head.value} / loss {self.loss.value} / metric {self.metric.value} do not fit together",
                field=f"tasks.{self.name}",
            )
        if self.head is HeadKind.RECON_IMAGE:
            if self.image_shape is None:
                raise ConfigurationError("recon_image head needs image_shape", field=f"tasks.{self.name}")
            if math.prod(self.image_shape) != self.num_outputs:
                raise ConfigurationError("num_outputs must equal C·H·W", field=f"tasks.{self.name}")


class TaskRegistry:
    """Ordered task set K; task ids are positions in registration order."""

    def __init__(self, specs: Sequence[TaskSpec] = ()) -> None:
        self._specs: List[TaskSpec] = []
        for spec in specs:
            self.register(spec)

    def register(self, spec: TaskSpec) -> TaskSpec:
        spec.check_consistency()
        if spec.id != len(self._specs):
            raise ConfigurationError(
                f"task ids must be assigned in registration order: expected {len(self._specs)}, got {spec.id}",
                field=f"tasks.{spec.name}",
            )
        if any(s.name == spec.name for s in self._specs):
            raise ConfigurationError(f"duplicate task name {spec.name!r}", field="tasks")
        self._specs.append(spec)
        return spec

    def __len__(self) -> int:
        return len(self._specs)

    def __iter__(self) -> Iterator[TaskSpec]:
        return iter(self._specs)

    def get(self, key: int | str) -> TaskSpec:
        if isinstance(key, int):
            if 0 <= key < len(self._specs):
                return self._specs[key]
        else:
            for spec in self._specs:
                if spec.name == key:
                    return spec
        raise LookupIndexError("task registry", key, len(self._specs))

    def modalities(self) -> List[Modality]:
        used = {m for spec in self._specs for m in spec.modalities}
        return [m for m in Modality if m in used]
