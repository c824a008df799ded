"""
Dense float64 tensors with reverse-mode differentiation.

Every differentiable operation is a `Function` subclass. Applying one records
the producing node on its output tensor; `backward` rebuilds a `Tape` from the
loss (topological order, inputs before consumers) and replays it in reverse.
"""

import logging
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from semcomm_common.exceptions import ContractError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]

_grad_enabled: ContextVar[bool] = ContextVar("semcomm_grad_enabled", default=True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Stop recording operations in the current context (thread or task)."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def grad_enabled() -> bool:
    return _grad_enabled.get()


class Function:
    """
    A recorded operation node.

    Subclasses implement `forward` on raw arrays and `backward`, which maps the
    gradient of the output to one gradient (or None) per input tensor.
    """

    def __init__(self, *inputs: "Tensor") -> None:
        self.inputs: Tuple["Tensor", ...] = inputs

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no forward pass")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"{type(self).__name__} has no backward pass")

    @classmethod
    def apply(cls, *tensors: "Tensor", **kwargs: Any) -> "Tensor":
        fn = cls(*tensors)
        out = fn.forward(*(t.data for t in tensors), **kwargs)
        requires_grad = grad_enabled() and any(t.requires_grad for t in tensors)
        return Tensor(out, requires_grad=requires_grad, creator=fn if requires_grad else None)


class Tensor:
    """
    An n-dimensional float64 array that can take part in a differentiation graph.

    Leaf tensors created with requires_grad=True are trainable parameters;
    their `grad` accumulates across backward calls until `zero_grad`.
    """

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        creator: Optional[Function] = None,
        name: Optional[str] = None,
    ) -> None:
        if creator is None:
            self.data: np.ndarray = np.array(data, dtype=np.float64)
        else:
            self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.creator = creator
        self.name = name
        self.grad: Optional[np.ndarray] = None

    # ------------------------------------------------------------------
    # Introspection
    # ------------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self.creator is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError("item() needs a single-element tensor", {"shape": self.shape})
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------------
    # Operator sugar (implementations live in functional.py)
    # ------------------------------------------------------------------

    def __add__(self, other: "Tensor") -> "Tensor":
        from . import functional as F

        return F.add(self, _as_tensor(other))

    def __sub__(self, other: "Tensor") -> "Tensor":
        from . import functional as F

        return F.sub(self, _as_tensor(other))

    def __mul__(self, other: "Tensor") -> "Tensor":
        from . import functional as F

        return F.mul(self, _as_tensor(other))

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from . import functional as F

        return F.matmul(self, other)

    def __neg__(self) -> "Tensor":
        from . import functional as F

        return F.scale(self, -1.0)

    def __getitem__(self, key: Any) -> "Tensor":
        from . import functional as F

        return F.index(self, key)

    @property
    def T(self) -> "Tensor":
        from . import functional as F

        return F.permute(self, (1, 0))

    def reshape(self, *shape: int) -> "Tensor":
        from . import functional as F

        return F.reshape(self, shape)

    def sum(self) -> "Tensor":
        from . import functional as F

        return F.sum_all(self)

    def mean(self) -> "Tensor":
        from . import functional as F

        return F.mean_all(self)


def _as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class Tape:
    """
    Operation nodes reachable from an output, in recording (topological) order.

    Each entry is a non-leaf tensor together with the Function that produced it.
    """

    def __init__(self, outputs: List[Tensor]) -> None:
        self.outputs = outputs

    @property
    def nodes(self) -> List[Function]:
        return [t.creator for t in self.outputs if t.creator is not None]

    def __len__(self) -> int:
        return len(self.outputs)

    @classmethod
    def from_output(cls, root: Tensor) -> "Tape":
        order: List[Tensor] = []
        visited = set()
        # iterative post-order DFS; graphs are deep enough to hit the recursion limit
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                order.append(tensor)
                continue
            if id(tensor) in visited or tensor.creator is None:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            for parent in reversed(tensor.creator.inputs):
                if parent.requires_grad and parent.creator is not None and id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order)

    def leaves(self) -> List[Tensor]:
        """Trainable leaf tensors feeding this tape, first-use order, no duplicates."""
        seen = set()
        found: List[Tensor] = []
        for tensor in self.outputs:
            assert tensor.creator is not None
            for parent in tensor.creator.inputs:
                if parent.requires_grad and parent.creator is None and id(parent) not in seen:
                    seen.add(id(parent))
                    found.append(parent)
        return found

    def backward(self, root: Tensor, seed: Optional[np.ndarray] = None) -> None:
        grads: Dict[int, np.ndarray] = {
            id(root): np.ones_like(root.data) if seed is None else np.asarray(seed, dtype=np.float64)
        }
        for tensor in reversed(self.outputs):
            grad = grads.pop(id(tensor), None)
            if grad is None:
                continue
            tensor.grad = grad if tensor.grad is None else tensor.grad + grad
            assert tensor.creator is not None
            input_grads = tensor.creator.backward(grad)
            for parent, parent_grad in zip(tensor.creator.inputs, input_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if parent.creator is None:
                    parent.grad = parent_grad.copy() if parent.grad is None else parent.grad + parent_grad
                else:
                    key = id(parent)
                    grads[key] = parent_grad if key not in grads else grads[key] + parent_grad


def backward(loss: Tensor) -> Tape:
    """
    Accumulate d(loss)/d(t) into `.grad` of every requires_grad tensor reachable
    from `loss`. Returns the replayed tape so callers can inspect its leaves.
    """
    if loss.data.size != 1:
        raise ContractError("backward() needs a scalar loss", {"shape": loss.shape})
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any trainable tensor")
    if loss.creator is None:
        loss.grad = np.ones_like(loss.data) if loss.grad is None else loss.grad + 1.0
        return Tape([])
    tape = Tape.from_output(loss)
    tape.backward(loss)
    return tape
