import logging

import numpy as np

from semcomm_common.enums import HeadKind, LossKind
from semcomm_common.exceptions import ContractError

from . import functional as F
from .config import TaskSpec
from .nn import Linear, Module
from .tensor import Tensor

logger = logging.getLogger(__name__)

_VECTOR_HEADS = (HeadKind.CLASS_VEC, HeadKind.RECON_IMAGE)


class TaskHead(Module):
    """
    One or two linear layers, no activation anywhere. Vector heads mean-pool
    multi-row input first; sequence heads apply the same map to every row.
    """

    def __init__(self, spec: TaskSpec, width: int, rng: np.random.Generator) -> None:
        self.kind = spec.head
        self.width = width
        self.out_width = spec.num_outputs + (1 if spec.loss is LossKind.CTC else 0)
        self.image_shape = spec.image_shape
        if spec.hidden:
            self.layers = [Linear(width, spec.hidden, rng), Linear(spec.hidden, self.out_width, rng)]
        else:
            self.layers = [Linear(width, self.out_width, rng)]

    @property
    def pools(self) -> bool:
        return self.kind in _VECTOR_HEADS

    def __call__(self, f: Tensor) -> Tensor:
        if f.ndim != 2 or f.shape[0] < 1 or f.shape[1] != self.width:
            raise ContractError(
                f"{self.kind.value} head expects rows of width {self.width}", {"shape": f.shape}
            )
        h = F.mean_rows(f) if self.pools and f.shape[0] > 1 else f
        for layer in self.layers:
            h = layer(h)
        return h

    def reconstruct_image(self, f: Tensor) -> Tensor:
        if self.kind is not HeadKind.RECON_IMAGE or self.image_shape is None:
            raise ContractError("reconstruct_image needs a recon_image head", {"head": self.kind.value})
        return F.reshape(self(f), self.image_shape)


def head_forward(f: Tensor, spec: TaskSpec, params: TaskHead) -> Tensor:
    if spec.head is not params.kind:
        raise ContractError("head parameters do not match the task", {"task": spec.head.value, "params": params.kind.value})
    return params(f)
