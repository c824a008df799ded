from typing import Any, Dict, Optional, Sequence


class SemCommError(Exception):
    """Base exception."""


class DimensionError(SemCommError):
    def __init__(
        self,
        op: str,
        left: Sequence[int],
        right: Optional[Sequence[int]] = None,
        detail: str = "",
    ) -> None:
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right) if right is not None else None
        self.detail = detail

    def __str__(self) -> str:
        shapes = f"{self.left}" if self.right is None else f"{self.left} and {self.right}"
        msg = f"{self.op}: incompatible shapes {shapes}"
        return f"{msg} ({self.detail})" if self.detail else msg


class ContractError(SemCommError):
    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None) -> None:
        self.message = message
        self.context = context or {}

    def __str__(self) -> str:
        if not self.context:
            return self.message
        ctx = ", ".join(f"{k}={v!r}" for k, v in self.context.items())
        return f"{self.message} [{ctx}]"


class LookupIndexError(SemCommError):
    def __init__(self, table: str, key: Any, size: Optional[int] = None) -> None:
        self.table = table
        self.key = key
        self.size = size

    def __str__(self) -> str:
        bound = f" (size {self.size})" if self.size is not None else ""
        return f"{self.table}: no entry for {self.key!r}{bound}"


class NumericError(SemCommError):
    """Raised when an operation receives non-finite input."""


class DegenerateInputError(SemCommError):
    """Raised when an input is too small or too flat for the operation."""


class ConfigurationError(SemCommError):
    def __init__(self, message: str, field: Optional[str] = None) -> None:
        self.message = message
        self.field = field

    def __str__(self) -> str:
        return f"{self.field}: {self.message}" if self.field else self.message


class CheckpointError(SemCommError):
    """Corrupt, truncated, or inconsistent record container."""


class CheckpointVersionError(CheckpointError):
    def __init__(self, expected: Any, found: Any, what: str = "version") -> None:
        self.expected = expected
        self.found = found
        self.what = what

    def __str__(self) -> str:
        return f"{self.what} mismatch: expected {self.expected!r}, found {self.found!r}"


class InfeasibleAlignmentError(SemCommError):
    def __init__(self, frames: int, required: int) -> None:
        self.frames = frames
        self.required = required

    def __str__(self) -> str:
        return f"label needs at least {self.required} frames, got {self.frames}"
