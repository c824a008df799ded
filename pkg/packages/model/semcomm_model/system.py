"""
The assembled transceiver: semantic encoders, task embeddings, fusion, channel
coders and one head per task, plus the per-sample forward pass

    single-modal   encoder -> channel encode -> channel -> decode -> head
    fused          encoders -> fuse (1×P) -> channel encode -> ...
    concat         encoders -> concat + task row (L×P) -> channel encode -> ...
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from semcomm_common.enums import Modality, TransmissionMode
from semcomm_common.exceptions import ContractError, LookupIndexError

from . import functional as F
from .channel import ChannelDecoder, ChannelEncoder, SymbolBlock, apply_channel
from .config import ChannelConfig, ModelConfig, TaskRegistry, TaskSpec
from .encoders import TaskEmbeddingTable, build_encoders, fbank_for
from .features import SemanticFeatures
from .fusion import FusionModule, concat_features
from .heads import TaskHead
from .nn import Module
from .tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class ForwardResult:
    output: Tensor
    block: SymbolBlock
    received: Tensor

    @property
    def transmitted_rows(self) -> int:
        return self.block.symbols.shape[0]


class SemanticCommSystem(Module):
    def __init__(
        self,
        config: ModelConfig,
        registry: TaskRegistry,
        rng: np.random.Generator,
        mode: TransmissionMode = TransmissionMode.FUSED,
    ) -> None:
        config.validate_consistency()
        if len(registry) == 0:
            raise ContractError("the system needs at least one registered task")
        self.config = config
        self.registry = registry
        self.mode = mode
        self.encoders = build_encoders(config, registry.modalities(), rng)
        self.task_table = TaskEmbeddingTable(len(registry), config.width, rng)
        needs_fusion = mode is TransmissionMode.FUSED and any(spec.multimodal for spec in registry)
        self.fusion = FusionModule(config.width, config.fusion, rng, config.layer_norm_eps) if needs_fusion else None
        self.channel_encoder = ChannelEncoder(config.width, config.d, rng)
        self.channel_decoder = ChannelDecoder(config.width, config.d, rng)
        self.heads = {spec.name: TaskHead(spec, config.width, rng) for spec in registry}
        # names every parameter once, in construction order
        self.parameters()

    # ------------------------------------------------------------------
    # Encoding
    # ------------------------------------------------------------------

    def encode(self, modality: Modality, payload: Any, task_id: int = 0) -> SemanticFeatures:
        encoder = self.encoders.get(modality)
        if encoder is None:
            raise LookupIndexError("encoders", modality.value, len(self.encoders))
        if modality is Modality.TEXT:
            if isinstance(payload, Mapping):
                return encoder(payload["ids"], payload.get("segments"), task_id)
            return encoder(list(payload), None, task_id)
        if modality is Modality.SPEECH:
            wave = np.asarray(payload, dtype=np.float64)
            fbank = fbank_for(wave, self.config.speech) if wave.ndim == 1 else Tensor(wave)
            return encoder(fbank, task_id)
        return encoder(Tensor(payload), task_id)

    def features_for(self, spec: TaskSpec, inputs: Mapping[Modality, Any]) -> List[SemanticFeatures]:
        missing = [m.value for m in spec.modalities if m not in inputs]
        if missing:
            raise ContractError("sample lacks modalities the task needs", {"task": spec.name, "missing": missing})
        return [self.encode(m, inputs[m], spec.id) for m in spec.modalities]

    def semantic_rows(self, spec: TaskSpec, inputs: Mapping[Modality, Any]) -> Tensor:
        """The matrix handed to the channel encoder for one sample."""
        features = self.features_for(spec, inputs)
        if not spec.multimodal:
            # single-modal features do not go through fusion
            return features[0].matrix
        if self.mode is TransmissionMode.FUSED:
            assert self.fusion is not None
            return self.fusion(features, spec.id, self.task_table).vector
        rows = concat_features(features)
        return F.concat([rows.matrix, self.task_table.row(spec.id)], axis=0)

    # ------------------------------------------------------------------
    # Full pipeline
    # ------------------------------------------------------------------

    def forward(
        self,
        task: "int | str",
        inputs: Mapping[Modality, Any],
        channel: ChannelConfig,
        rng: Optional[np.random.Generator] = None,
    ) -> ForwardResult:
        spec = self.registry.get(task)
        block = self.channel_encoder(self.semantic_rows(spec, inputs))
        received = apply_channel(block, channel, rng)
        decoded = self.channel_decoder(received)
        return ForwardResult(self.heads[spec.name](decoded), block, received)

    def transmitted_length(self, spec: TaskSpec) -> int:
        """Rows L_x sent over the channel for one instance of `spec`."""
        lengths = [self.config.sequence_length(m) for m in spec.modalities]
        if not spec.multimodal:
            return lengths[0]
        if self.mode is TransmissionMode.FUSED:
            return 1
        return sum(lengths) + 1

    def modules_for(self, spec: TaskSpec) -> Dict[str, Module]:
        """Sub-modules a step on `spec` may touch."""
        touched: Dict[str, Module] = {f"encoders.{m.value}": self.encoders[m] for m in spec.modalities}
        if spec.multimodal:
            touched["task_table"] = self.task_table
            if self.fusion is not None:
                touched["fusion"] = self.fusion
        touched["channel_encoder"] = self.channel_encoder
        touched["channel_decoder"] = self.channel_decoder
        touched[f"heads.{spec.name}"] = self.heads[spec.name]
        return touched


def build_system(
    config: ModelConfig,
    specs: Sequence[TaskSpec],
    seed: int,
    mode: TransmissionMode = TransmissionMode.FUSED,
) -> SemanticCommSystem:
    return SemanticCommSystem(config, TaskRegistry(specs), np.random.default_rng(seed), mode)
