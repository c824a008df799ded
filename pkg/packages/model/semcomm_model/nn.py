import math
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from semcomm_common.exceptions import DimensionError

from . import functional as F
from .tensor import Tensor


def glorot_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, fan_out: int) -> Tensor:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True)


def embedding_normal(rng: np.random.Generator, shape: Tuple[int, ...], std: float = 0.02) -> Tensor:
    return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True)


def zeros(shape: Tuple[int, ...]) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def ones(shape: Tuple[int, ...]) -> Tensor:
    return Tensor(np.ones(shape), requires_grad=True)


class Module:
    """
    Parameter container. Trainable tensors and sub-modules are discovered from
    instance attributes (including lists and dicts of them) in assignment order,
    which makes parameter names and iteration order deterministic.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        seen = set()
        for attr, value in vars(self).items():
            for name, p in _walk(value, prefix + attr):
                if id(p) not in seen:
                    seen.add(id(p))
                    yield name, p

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


def _walk(value: object, name: str) -> Iterator[Tuple[str, Tensor]]:
    if isinstance(value, Tensor):
        if value.requires_grad and value.is_leaf:
            if value.name is None:
                value.name = name
            yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(name + ".")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(item, f"{name}.{i}")
    elif isinstance(value, dict):
        for key, item in value.items():
            yield from _walk(item, f"{name}.{getattr(key, 'value', key)}")


class Linear(Module):
    """y = x W + b with W: in×out."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator) -> None:
        self.in_features = in_features
        self.out_features = out_features
        self.weight = glorot_uniform(rng, (in_features, out_features), in_features, out_features)
        self.bias = zeros((out_features,))

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise DimensionError("linear", x.shape, self.weight.shape)
        return F.add(F.matmul(x, self.weight), self.bias)


class LayerNormParams(Module):
    def __init__(self, width: int, eps: float = 1e-5) -> None:
        self.gain = ones((width,))
        self.bias = zeros((width,))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gain, self.bias, self.eps)


def zero_module(module: Module, only: Optional[List[str]] = None) -> None:
    """Set parameters to zero in place (all, or those whose name starts with one of `only`)."""
    for name, p in module.named_parameters():
        if only is None or any(name.startswith(prefix) for prefix in only):
            p.data[...] = 0.0
