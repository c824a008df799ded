from dataclasses import dataclass, field
from typing import List, Tuple

from semcomm_common.enums import Modality
from semcomm_common.exceptions import ContractError

from .tensor import Tensor


@dataclass
class SemanticFeatures:
    """An L×P feature matrix tagged with the modality and task that produced it."""

    matrix: Tensor
    modality: Modality
    task_id: int = 0

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2 or self.matrix.shape[0] < 1:
            raise ContractError("semantic features must be a non-empty L×P matrix", {"shape": self.matrix.shape})

    @property
    def length(self) -> int:
        return self.matrix.shape[0]

    @property
    def width(self) -> int:
        return self.matrix.shape[1]


@dataclass
class TaggedRows:
    """Concatenated features with the modality of every row."""

    matrix: Tensor
    tags: List[Modality]
    lengths: List[int] = field(default_factory=list)


@dataclass
class FusedFeatures:
    vector: Tensor
    task_id: int
    source_lengths: Tuple[int, ...]

    def __post_init__(self) -> None:
        if self.vector.ndim != 2 or self.vector.shape[0] != 1:
            raise ContractError("fused features must be a single 1×P row", {"shape": self.vector.shape})

    @property
    def pre_aggregation_length(self) -> int:
        return sum(self.source_lengths) + 1
