"""
Post-norm transformer layer shared by the text, speech and video encoders and
by the fusion module:

    H' = LN(MSA(H) + H)
    out = LN(FFN(H') + H')

with MSA(H) = concat(head_1..head_h) W_O, head_i = softmax(Q_i K_iᵀ / s) V_i and
FFN = two linear layers with GeLU in between.
"""

import logging
import math
from typing import List, Literal, Optional

import numpy as np

from semcomm_common.exceptions import ConfigurationError, DimensionError

from . import functional as F
from .nn import LayerNormParams, Linear, Module
from .tensor import Tensor, no_grad

logger = logging.getLogger(__name__)

ScaleMode = Literal["width", "head"]


def resolve_heads(width: int, preferred: int, fallback: int) -> int:
    """Use `preferred` heads when they divide the width, otherwise `fallback`."""
    if width % preferred == 0:
        return preferred
    if width % fallback == 0:
        logger.warning(
            "width %d is not divisible by %d heads; falling back to %d heads", width, preferred, fallback
        )
        return fallback
    raise ConfigurationError(f"width {width} divisible by neither {preferred} nor {fallback} heads")


class AttentionLayer(Module):
    def __init__(
        self,
        width: int,
        num_heads: int,
        rng: np.random.Generator,
        ffn_width: Optional[int] = None,
        scale_mode: ScaleMode = "width",
        eps: float = 1e-5,
    ) -> None:
        if width % num_heads:
            raise ConfigurationError(f"width {width} not divisible by {num_heads} heads")
        self.width = width
        self.num_heads = num_heads
        self.head_width = width // num_heads
        self.scale_mode = scale_mode
        self.query = Linear(width, width, rng)
        self.key = Linear(width, width, rng)
        self.value = Linear(width, width, rng)
        self.out = Linear(width, width, rng)
        self.norm1 = LayerNormParams(width, eps)
        self.ffn1 = Linear(width, ffn_width or 4 * width, rng)
        self.ffn2 = Linear(ffn_width or 4 * width, width, rng)
        self.norm2 = LayerNormParams(width, eps)

    @property
    def scale(self) -> float:
        denom = self.width if self.scale_mode == "width" else self.head_width
        return 1.0 / math.sqrt(denom)

    def _head_slices(self) -> List[slice]:
        return [slice(i * self.head_width, (i + 1) * self.head_width) for i in range(self.num_heads)]

    def multi_head(self, h: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        q, k, v = self.query(h), self.key(h), self.value(h)
        heads = []
        for cols in self._head_slices():
            qi, ki, vi = q[:, cols], k[:, cols], v[:, cols]
            weights = F.softmax_rows(F.scale(F.matmul(qi, ki.T), self.scale), mask)
            heads.append(F.matmul(weights, vi))
        merged = heads[0] if len(heads) == 1 else F.concat(heads, axis=1)
        return self.out(merged)

    def __call__(self, h: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        if h.ndim != 2 or h.shape[1] != self.width or h.shape[0] < 1:
            raise DimensionError("attention_layer", h.shape, (None, self.width))
        h1 = self.norm1(F.add(self.multi_head(h, mask), h))
        ff = self.ffn2(F.gelu(self.ffn1(h1)))
        return self.norm2(F.add(ff, h1))

    def attention_weights(self, h: Tensor, mask: Optional[np.ndarray] = None) -> List[np.ndarray]:
        """Per-head softmax matrices for inspection; nothing is recorded."""
        with no_grad():
            q, k = self.query(h), self.key(h)
            return [
                F.softmax_rows(F.scale(F.matmul(q[:, c], k[:, c].T), self.scale), mask).data
                for c in self._head_slices()
            ]


def attention_layer(h_in: Tensor, params: AttentionLayer, mask: Optional[np.ndarray] = None) -> Tensor:
    return params(h_in, mask)
