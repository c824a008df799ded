"""
Differentiable operations over `Tensor`.

Broadcasting is limited to one form: a right operand whose shape equals the
left operand's trailing shape (``b.shape == a.shape[1:]``) or that shape with a
leading 1 is repeated along the leading axis. Every other mix of shapes is a
DimensionError.
"""

import logging
import math
from typing import Any, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from semcomm_common.exceptions import (
    ContractError,
    DegenerateInputError,
    DimensionError,
    LookupIndexError,
    NumericError,
)

from .tensor import Function, Tensor

logger = logging.getLogger(__name__)

GELU_C = math.sqrt(2.0 / math.pi)
GELU_K = 0.044715


# ----------------------------------------------------------------------
# Elementwise arithmetic
# ----------------------------------------------------------------------


def _broadcast_kind(op: str, a: np.ndarray, b: np.ndarray) -> bool:
    """Return True when b is broadcast along a's leading axis."""
    if a.shape == b.shape:
        return False
    if a.ndim >= 1 and (b.shape == a.shape[1:] or b.shape == (1,) + a.shape[1:]):
        return True
    raise DimensionError(op, a.shape, b.shape, "only row-vector broadcast is supported")


class _Binary(Function):
    op = "binary"

    def _prepare(self, a: np.ndarray, b: np.ndarray) -> None:
        self.broadcast = _broadcast_kind(self.op, a, b)
        self.b_shape = b.shape

    def _reduce_b(self, grad_b: np.ndarray) -> np.ndarray:
        if self.broadcast:
            return grad_b.sum(axis=0).reshape(self.b_shape)
        return grad_b


class Add(_Binary):
    op = "add"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self._prepare(a, b)
        return a + b

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return grad, self._reduce_b(grad)


class Sub(_Binary):
    op = "sub"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self._prepare(a, b)
        return a - b

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return grad, self._reduce_b(-grad)


class Mul(_Binary):
    op = "mul"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self._prepare(a, b)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return grad * self.b, self._reduce_b(grad * self.a)


def add(a: Tensor, b: Tensor) -> Tensor:
    return Add.apply(a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return Sub.apply(a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return Mul.apply(a, b)


def elementwise(kind: str, a: Tensor, b: Tensor) -> Tensor:
    ops = {"add": add, "sub": sub, "mul": mul}
    if kind not in ops:
        raise ContractError(f"unknown elementwise kind {kind!r}", {"allowed": sorted(ops)})
    return ops[kind](a, b)


class Scale(Function):
    def forward(self, a: np.ndarray, factor: float = 1.0) -> np.ndarray:
        self.factor = factor
        return a * factor

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (grad * self.factor,)


def scale(a: Tensor, factor: float) -> Tensor:
    return Scale.apply(a, factor=float(factor))


# ----------------------------------------------------------------------
# Linear algebra and reductions
# ----------------------------------------------------------------------


class MatMul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise DimensionError("matmul", a.shape, b.shape)
        self.a, self.b = a, b
        return a @ b

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return grad @ self.b.T, self.a.T @ grad


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


class SumAll(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.shape = a.shape
        return np.asarray(a.sum())

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (np.full(self.shape, float(grad)),)


class MeanAll(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.shape = a.shape
        self.count = max(a.size, 1)
        return np.asarray(a.mean() if a.size else 0.0)

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (np.full(self.shape, float(grad) / self.count),)


class MeanRows(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        if a.ndim != 2 or a.shape[0] == 0:
            raise DimensionError("mean_rows", a.shape, detail="needs a non-empty matrix")
        self.rows = a.shape[0]
        return a.mean(axis=0, keepdims=True)

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (np.repeat(grad / self.rows, self.rows, axis=0),)


def sum_all(a: Tensor) -> Tensor:
    return SumAll.apply(a)


def mean_all(a: Tensor) -> Tensor:
    return MeanAll.apply(a)


def mean_rows(a: Tensor) -> Tensor:
    """Average over the first dimension: L×P -> 1×P."""
    return MeanRows.apply(a)


# ----------------------------------------------------------------------
# Shape plumbing
# ----------------------------------------------------------------------


class Reshape(Function):
    def forward(self, a: np.ndarray, shape: Tuple[int, ...] = ()) -> np.ndarray:
        self.in_shape = a.shape
        try:
            return a.reshape(shape)
        except ValueError as exc:
            raise DimensionError("reshape", a.shape, shape) from exc

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (grad.reshape(self.in_shape),)


class Permute(Function):
    def forward(self, a: np.ndarray, axes: Tuple[int, ...] = ()) -> np.ndarray:
        if sorted(axes) != list(range(a.ndim)):
            raise DimensionError("permute", a.shape, axes, "axes must permute every dimension")
        self.inverse = tuple(np.argsort(axes))
        return np.transpose(a, axes)

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (np.transpose(grad, self.inverse),)


class Index(Function):
    def forward(self, a: np.ndarray, key: Any = None) -> np.ndarray:
        self.in_shape = a.shape
        self.key = key
        try:
            return np.array(a[key])
        except IndexError as exc:
            raise DimensionError("index", a.shape, detail=str(exc)) from exc

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        full = np.zeros(self.in_shape)
        np.add.at(full, self.key, grad)
        return (full,)


class Concat(Function):
    def forward(self, *arrays: np.ndarray, axis: int = 0) -> np.ndarray:
        if not arrays:
            raise ContractError("concat needs at least one tensor")
        ref = arrays[0]
        for arr in arrays[1:]:
            if arr.ndim != ref.ndim or any(
                d != axis and arr.shape[d] != ref.shape[d] for d in range(ref.ndim)
            ):
                raise DimensionError("concat", ref.shape, arr.shape)
        self.axis = axis
        self.bounds = np.cumsum([arr.shape[axis] for arr in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return tuple(np.split(grad, self.bounds, axis=self.axis))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(a, shape=tuple(shape))


def permute(a: Tensor, axes: Sequence[int]) -> Tensor:
    return Permute.apply(a, axes=tuple(axes))


def index(a: Tensor, key: Any) -> Tensor:
    return Index.apply(a, key=key)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def take_rows(table: Tensor, ids: Sequence[int], table_name: str = "table") -> Tensor:
    """Embedding lookup: rows of `table` at `ids` (repeats allowed)."""
    idx = np.asarray(ids, dtype=np.int64)
    rows = table.shape[0]
    bad = idx[(idx < 0) | (idx >= rows)]
    if bad.size:
        raise LookupIndexError(table_name, int(bad[0]), rows)
    return Index.apply(table, key=idx)


# ----------------------------------------------------------------------
# Nonlinearities and normalization
# ----------------------------------------------------------------------


class SoftmaxRows(Function):
    def forward(self, x: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] < 1:
            raise DimensionError("softmax_rows", x.shape, detail="needs m×n with n ≥ 1")
        if not np.all(np.isfinite(x)):
            raise NumericError("softmax_rows received non-finite input")
        z = x
        if mask is not None:
            if mask.shape != x.shape:
                raise DimensionError("softmax_rows mask", x.shape, mask.shape)
            if not np.all(mask.any(axis=1)):
                raise ContractError("every softmax row needs at least one unmasked entry")
            z = np.where(mask, x, -np.inf)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        self.y = e / e.sum(axis=1, keepdims=True)
        return self.y

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        y = self.y
        return (y * (grad - (grad * y).sum(axis=1, keepdims=True)),)


def softmax_rows(x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Row-wise softmax with max subtraction. `mask` (bool, same shape) keeps
    True entries; masked entries get exactly zero weight.
    """
    return SoftmaxRows.apply(x, mask=mask)


class LayerNorm(Function):
    def forward(
        self, x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = 1e-5
    ) -> np.ndarray:
        if x.ndim != 2:
            raise DimensionError("layer_norm", x.shape, detail="needs an m×n matrix")
        n = x.shape[1]
        if n < 2:
            raise DegenerateInputError(f"layer_norm needs at least 2 columns, got {n}")
        if gain.shape != (n,) or bias.shape != (n,):
            raise DimensionError("layer_norm affine", gain.shape, bias.shape)
        mu = x.mean(axis=1, keepdims=True)
        var = x.var(axis=1, keepdims=True)
        self.inv_std = 1.0 / np.sqrt(var + eps)
        self.xhat = (x - mu) * self.inv_std
        self.gain = gain
        return self.xhat * gain + bias

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        n = self.xhat.shape[1]
        dxhat = grad * self.gain
        dx = (self.inv_std / n) * (
            n * dxhat
            - dxhat.sum(axis=1, keepdims=True)
            - self.xhat * (dxhat * self.xhat).sum(axis=1, keepdims=True)
        )
        return dx, (grad * self.xhat).sum(axis=0), grad.sum(axis=0)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    return LayerNorm.apply(x, gain, bias, eps=eps)


class GeLU(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        self.t = np.tanh(GELU_C * (x + GELU_K * x**3))
        return 0.5 * x * (1.0 + self.t)

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        x, t = self.x, self.t
        du = GELU_C * (1.0 + 3.0 * GELU_K * x**2)
        return (grad * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * du),)


def gelu(x: Tensor) -> Tensor:
    """tanh approximation: 0.5x(1 + tanh(sqrt(2/pi)(x + 0.044715x^3)))"""
    return GeLU.apply(x)


# ----------------------------------------------------------------------
# Convolutions
# ----------------------------------------------------------------------


class Conv2d(Function):
    def forward(
        self,
        x: np.ndarray,
        kernels: np.ndarray,
        bias: Optional[np.ndarray] = None,
        stride: int = 1,
        padding: int = 0,
    ) -> np.ndarray:
        if x.ndim != 3 or kernels.ndim != 4 or kernels.shape[1] != x.shape[0]:
            raise DimensionError("conv2d", x.shape, kernels.shape)
        _, height, width = x.shape
        kh, kw = kernels.shape[2:]
        if kh > height + 2 * padding or kw > width + 2 * padding:
            raise DimensionError("conv2d", x.shape, kernels.shape, "kernel larger than padded input")
        if stride < 1:
            raise ContractError("conv2d stride must be ≥ 1", {"stride": stride})
        xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
        windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
        self.windows = windows
        self.kernels = kernels
        self.padded_shape = xp.shape
        self.stride, self.padding = stride, padding
        out = np.tensordot(kernels, windows, axes=([1, 2, 3], [0, 3, 4]))
        if bias is not None:
            out = out + bias[:, None, None]
        return out

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        s, p = self.stride, self.padding
        kh, kw = self.kernels.shape[2:]
        out_h, out_w = grad.shape[1:]
        d_kernels = np.tensordot(grad, self.windows, axes=([1, 2], [1, 2]))
        d_padded = np.zeros(self.padded_shape)
        for i in range(kh):
            for j in range(kw):
                contrib = np.tensordot(self.kernels[:, :, i, j], grad, axes=([0], [0]))
                d_padded[:, i : i + s * (out_h - 1) + 1 : s, j : j + s * (out_w - 1) + 1 : s] += contrib
        height, width = self.padded_shape[1] - 2 * p, self.padded_shape[2] - 2 * p
        d_x = d_padded[:, p : p + height, p : p + width]
        grads: Tuple[Optional[np.ndarray], ...] = (d_x, d_kernels)
        if len(self.inputs) == 3:
            grads = grads + (grad.sum(axis=(1, 2)),)
        return grads


def conv2d(
    x: Tensor,
    kernels: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """Cross-correlation with zero padding: C×H×W * K×C×kh×kw -> K×H'×W'."""
    if bias is None:
        return Conv2d.apply(x, kernels, stride=stride, padding=padding)
    return Conv2d.apply(x, kernels, bias, stride=stride, padding=padding)


class CausalConv1d(Function):
    def forward(
        self,
        x: np.ndarray,
        kernels: np.ndarray,
        bias: Optional[np.ndarray] = None,
        stride: int = 1,
    ) -> np.ndarray:
        if x.ndim != 2 or kernels.ndim != 3 or kernels.shape[1] != x.shape[1]:
            raise DimensionError("causal_conv1d", x.shape, kernels.shape)
        kw = kernels.shape[2]
        if kw < 1 or stride < 1:
            raise ContractError("causal_conv1d needs kw ≥ 1 and stride ≥ 1", {"kw": kw, "stride": stride})
        # left-pad with kw-1 zero frames so step t sees only frames <= t
        xp = np.pad(x, ((kw - 1, 0), (0, 0)))
        windows = sliding_window_view(xp, kw, axis=0)[::stride]
        self.windows = windows
        self.kernels = kernels
        self.padded_len = xp.shape[0]
        self.stride = stride
        out = np.tensordot(windows, kernels, axes=([1, 2], [1, 2]))
        if bias is not None:
            out = out + bias
        return out

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        s = self.stride
        kw = self.kernels.shape[2]
        steps = grad.shape[0]
        d_kernels = np.tensordot(grad, self.windows, axes=([0], [0]))
        d_padded = np.zeros((self.padded_len, self.kernels.shape[1]))
        for j in range(kw):
            d_padded[j : j + s * (steps - 1) + 1 : s] += grad @ self.kernels[:, :, j]
        grads: Tuple[Optional[np.ndarray], ...] = (d_padded[kw - 1 :], d_kernels)
        if len(self.inputs) == 3:
            grads = grads + (grad.sum(axis=0),)
        return grads


def causal_conv1d(
    x: Tensor,
    kernels: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
) -> Tensor:
    """
    T×C * K×C×kw -> ceil(T/stride)×K. Output row j is computed at time
    j*stride from inputs at times <= j*stride.
    """
    if bias is None:
        return CausalConv1d.apply(x, kernels, stride=stride)
    return CausalConv1d.apply(x, kernels, bias, stride=stride)
