"""
Multi-modal fusion: concatenate per-modality features, add one segment vector
per modality (no positions), append the task row, run the attention stack and
average the rows into a single 1×P vector.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from semcomm_common.enums import MODALITY_ORDER, Modality
from semcomm_common.exceptions import ContractError, LookupIndexError

from . import functional as F
from .attention import AttentionLayer, resolve_heads
from .config import FusionConfig
from .encoders import TaskEmbeddingTable
from .features import FusedFeatures, SemanticFeatures, TaggedRows
from .nn import Module, embedding_normal
from .tensor import Tensor

logger = logging.getLogger(__name__)


class ModalSegmentTable(Module):
    """One trainable row per supported modality, in MODALITY_ORDER."""

    def __init__(self, width: int, rng: np.random.Generator) -> None:
        self.table = embedding_normal(rng, (len(MODALITY_ORDER), width))

    def row_ids(self, tags: Sequence[Modality]) -> list[int]:
        ids = []
        for tag in tags:
            if tag not in MODALITY_ORDER:
                raise LookupIndexError("modal segment table", str(tag), len(MODALITY_ORDER))
            ids.append(MODALITY_ORDER.index(tag))
        return ids


def concat_features(features: Sequence[SemanticFeatures]) -> TaggedRows:
    if not features:
        raise ContractError("concat_features needs at least one feature matrix")
    width = features[0].width
    task_id = features[0].task_id
    for f in features:
        if f.width != width:
            raise ContractError(
                "feature widths differ", {"expected": width, "got": f.width, "modality": f.modality.value}
            )
        if f.task_id != task_id:
            raise ContractError("features belong to different tasks", {"expected": task_id, "got": f.task_id})
    tags = [f.modality for f in features for _ in range(f.length)]
    matrix = features[0].matrix if len(features) == 1 else F.concat([f.matrix for f in features], axis=0)
    return TaggedRows(matrix, tags, [f.length for f in features])


def add_segment_embeddings(rows: TaggedRows, table: ModalSegmentTable) -> Tensor:
    segments = F.take_rows(table.table, table.row_ids(rows.tags), "modal segment table")
    return F.add(rows.matrix, segments)


class FusionModule(Module):
    def __init__(self, width: int, config: FusionConfig, rng: np.random.Generator, eps: float = 1e-5) -> None:
        self.config = config
        self.num_heads = resolve_heads(width, config.num_heads, config.fallback_heads)
        self.segments = ModalSegmentTable(width, rng)
        self.layers = [
            AttentionLayer(
                width,
                self.num_heads,
                rng,
                ffn_width=config.ffn_ratio * width,
                scale_mode=config.attention_scale,
                eps=eps,
            )
            for _ in range(config.num_layers)
        ]

    def __call__(
        self,
        features: Sequence[SemanticFeatures],
        task_id: int,
        tasks: TaskEmbeddingTable,
    ) -> FusedFeatures:
        if not features:
            raise ContractError("fuse needs at least one modality")
        rows = concat_features(features)
        if features[0].task_id != task_id:
            raise ContractError("features were encoded for another task", {"expected": task_id, "got": features[0].task_id})
        h = add_segment_embeddings(rows, self.segments)
        h = F.concat([h, tasks.row(task_id)], axis=0)
        h = self.run_layers(h)
        return FusedFeatures(F.mean_rows(h), task_id, tuple(rows.lengths))

    def run_layers(self, h: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        for layer in self.layers:
            h = layer(h, mask)
        return h


def fuse(
    features: Sequence[SemanticFeatures],
    task_id: int,
    module: FusionModule,
    tasks: TaskEmbeddingTable,
) -> FusedFeatures:
    return module(features, task_id, tasks)
