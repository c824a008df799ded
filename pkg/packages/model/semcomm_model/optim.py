import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping

import numpy as np

from semcomm_common.exceptions import ContractError

from .tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """
    Moments for one optimizer. Keys are parameter names, so a state only ever
    holds entries for parameters its own steps have touched.
    """

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ContractError("learning rate must be positive", {"lr": self.lr})

    def snapshot(self) -> Dict[str, object]:
        """Deep copy of the mutable state, for isolation checks."""
        return {
            "t": self.t,
            "m": {k: a.copy() for k, a in self.m.items()},
            "v": {k: a.copy() for k, a in self.v.items()},
        }


def adam_step(params: Iterable[Tensor], state: AdamState, grads: Mapping[str, np.ndarray] | None = None) -> None:
    """
    One bias-corrected Adam update over `params` in place:

        m <- b1 m + (1 - b1) g
        v <- b2 v + (1 - b2) g²
        θ <- θ - lr · m̂ / (sqrt(v̂) + eps)

    Gradients come from `grads` when given, else from each tensor's `.grad`.
    """
    params = list(params)
    resolved = []
    for p in params:
        if p.name is None:
            raise ContractError("adam_step needs named parameters", {"shape": p.shape})
        g = grads.get(p.name) if grads is not None else p.grad
        if g is None:
            raise ContractError("missing gradient for an active parameter", {"param": p.name})
        resolved.append((p, np.asarray(g, dtype=np.float64)))

    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for p, g in resolved:
        if p.name not in state.m:
            state.m[p.name] = np.zeros_like(p.data)
            state.v[p.name] = np.zeros_like(p.data)
        m, v = state.m[p.name], state.v[p.name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
