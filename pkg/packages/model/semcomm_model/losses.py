"""
Task losses. Each is a Function with an analytic backward pass, except the MSE
composite. All are numerically stable forms (log-sum-exp, log-space CTC).
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from semcomm_common.exceptions import ContractError, InfeasibleAlignmentError

from . import functional as F
from .tensor import Function, Tensor

logger = logging.getLogger(__name__)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _as_row(logits: Tensor, op: str) -> np.ndarray:
    if logits.ndim == 2 and logits.shape[0] == 1:
        return logits.data[0]
    if logits.ndim != 1:
        raise ContractError(f"{op} expects a logit vector", {"shape": logits.shape})
    return logits.data


# ----------------------------------------------------------------------
# Cross-entropy
# ----------------------------------------------------------------------


class CrossEntropy(Function):
    def forward(self, z: np.ndarray, label: int = 0) -> np.ndarray:
        self.shape = z.shape
        row = z.reshape(-1)
        self.log_probs = _log_softmax(row)
        self.label = label
        return np.asarray(-self.log_probs[label])

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        g = np.exp(self.log_probs)
        g[self.label] -= 1.0
        return ((float(grad) * g).reshape(self.shape),)


class CrossEntropyRows(Function):
    """Mean per-row cross-entropy of an L×V logit matrix against L labels."""

    def forward(self, z: np.ndarray, labels: Optional[np.ndarray] = None) -> np.ndarray:
        self.log_probs = _log_softmax(z)
        self.labels = labels
        rows = np.arange(z.shape[0])
        return np.asarray(-self.log_probs[rows, labels].mean())

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        g = np.exp(self.log_probs)
        g[np.arange(g.shape[0]), self.labels] -= 1.0
        return (float(grad) * g / g.shape[0],)


def cross_entropy_loss(logits: Tensor, label: int) -> Tensor:
    """-log softmax(logits)[label] for a 1-D (or 1×n) logit vector."""
    n = _as_row(logits, "cross_entropy_loss").size
    if not 0 <= label < n:
        raise ContractError("label out of range", {"label": label, "classes": n})
    return CrossEntropy.apply(logits, label=int(label))


def cross_entropy_rows(logits: Tensor, labels: Sequence[int]) -> Tensor:
    if logits.ndim != 2 or logits.shape[0] != len(labels):
        raise ContractError("need one label per logit row", {"shape": logits.shape, "labels": len(labels)})
    idx = np.asarray(labels, dtype=np.int64)
    if np.any((idx < 0) | (idx >= logits.shape[1])):
        raise ContractError("label out of range", {"classes": logits.shape[1]})
    return CrossEntropyRows.apply(logits, labels=idx)


# ----------------------------------------------------------------------
# Multi-label sigmoid cross-entropy
# ----------------------------------------------------------------------


class BinaryCrossEntropy(Function):
    def forward(self, z: np.ndarray, targets: Optional[np.ndarray] = None) -> np.ndarray:
        self.shape = z.shape
        self.z = z.reshape(-1)
        self.t = targets
        per_label = np.maximum(self.z, 0.0) - self.z * self.t + np.log1p(np.exp(-np.abs(self.z)))
        return np.asarray(per_label.mean())

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        sigmoid = 0.5 * (1.0 + np.tanh(0.5 * self.z))
        return ((float(grad) * (sigmoid - self.t) / self.z.size).reshape(self.shape),)


def binary_cross_entropy_multilabel(logits: Tensor, targets: Sequence[float]) -> Tensor:
    """Mean over labels of per-label sigmoid cross-entropy."""
    row = _as_row(logits, "binary_cross_entropy_multilabel")
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    if t.size != row.size:
        raise ContractError("one target per label", {"labels": row.size, "targets": t.size})
    if not np.all((t == 0.0) | (t == 1.0)):
        raise ContractError("multi-label targets must be 0 or 1")
    return BinaryCrossEntropy.apply(logits, targets=t)


# ----------------------------------------------------------------------
# CTC
# ----------------------------------------------------------------------


def ctc_required_frames(label: Sequence[int]) -> int:
    """Shortest input that can emit `label`: one frame per symbol plus a blank between repeats."""
    repeats = sum(1 for a, b in zip(label, label[1:]) if a == b)
    return len(label) + repeats


def _extended(label: Sequence[int], blank: int) -> np.ndarray:
    ext = np.full(2 * len(label) + 1, blank, dtype=np.int64)
    ext[1::2] = label
    return ext


def _skip_allowed(ext: np.ndarray, blank: int) -> np.ndarray:
    """skip[s]: state s may be entered from s-2 (non-blank, differs from the symbol two back)."""
    skip = np.zeros(ext.size, dtype=bool)
    skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    return skip


def _shift_right(a: np.ndarray, k: int) -> np.ndarray:
    return np.concatenate([np.full(k, -np.inf), a])[: a.size]


def _shift_left(a: np.ndarray, k: int) -> np.ndarray:
    return np.concatenate([a[k:], np.full(k, -np.inf)])[: a.size]


class CTCLoss(Function):
    """
    Negative log-likelihood of `label` under per-frame softmax outputs, summed
    over every blank-augmented alignment. The last logit column is the blank.
    """

    def forward(self, z: np.ndarray, label: Sequence[int] = ()) -> np.ndarray:
        T, width = z.shape
        blank = width - 1
        logp = _log_softmax(z)
        ext = _extended(label, blank)
        S = ext.size
        skip = _skip_allowed(ext, blank)
        emit = logp[:, ext]

        alpha = np.full((T, S), -np.inf)
        alpha[0, 0] = emit[0, 0]
        if S > 1:
            alpha[0, 1] = emit[0, 1]
        for t in range(1, T):
            prev = alpha[t - 1]
            stay = prev
            step = _shift_right(prev, 1)
            jump = np.where(skip, _shift_right(prev, 2), -np.inf)
            alpha[t] = np.logaddexp(np.logaddexp(stay, step), jump) + emit[t]

        beta = np.full((T, S), -np.inf)
        beta[T - 1, S - 1] = 0.0
        if S > 1:
            beta[T - 1, S - 2] = 0.0
        skip_from = np.concatenate([skip[2:], [False, False]])[:S]
        for t in range(T - 2, -1, -1):
            nxt = beta[t + 1] + emit[t + 1]
            step = _shift_left(nxt, 1)
            jump = np.where(skip_from, _shift_left(nxt, 2), -np.inf)
            beta[t] = np.logaddexp(np.logaddexp(nxt, step), jump)

        tail = alpha[T - 1, S - 1] if S == 1 else np.logaddexp(alpha[T - 1, S - 1], alpha[T - 1, S - 2])
        self.log_likelihood = float(tail)
        self.logp, self.ext, self.alpha, self.beta = logp, ext, alpha, beta
        return np.asarray(-self.log_likelihood)

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        T, width = self.logp.shape
        occupancy = np.full((T, width), -np.inf)
        joint = self.alpha + self.beta - self.log_likelihood
        for s, k in enumerate(self.ext):
            occupancy[:, k] = np.logaddexp(occupancy[:, k], joint[:, s])
        return (float(grad) * (np.exp(self.logp) - np.exp(occupancy)),)


class _InfeasibleCTC(Function):
    def forward(self, z: np.ndarray) -> np.ndarray:
        self.shape = z.shape
        return np.asarray(np.inf)

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (np.zeros(self.shape),)


def ctc_loss(logit_rows: Tensor, label: Sequence[int], strict: bool = False) -> Tensor:
    """
    CTC loss over T×(V+1) logits with blank = V. A label too long for T yields
    +inf (zero gradient) and a warning, or InfeasibleAlignmentError when strict.
    """
    if logit_rows.ndim != 2 or logit_rows.shape[1] < 2:
        raise ContractError("ctc_loss expects T×(V+1) logits with V ≥ 1", {"shape": logit_rows.shape})
    frames, width = logit_rows.shape
    label = [int(s) for s in label]
    if any(not 0 <= s < width - 1 for s in label):
        raise ContractError("CTC label symbol out of range", {"symbols": width - 1, "label": label})
    required = ctc_required_frames(label)
    if frames < required:
        if strict:
            raise InfeasibleAlignmentError(frames, required)
        logger.warning("infeasible CTC alignment: label needs %d frames, got %d", required, frames)
        return _InfeasibleCTC.apply(logit_rows)
    return CTCLoss.apply(logit_rows, label=label)


# ----------------------------------------------------------------------
# Reconstruction
# ----------------------------------------------------------------------


def mse_loss(prediction: Tensor, target: Tensor) -> Tensor:
    if prediction.shape != target.shape:
        raise ContractError("mse_loss needs equal shapes", {"prediction": prediction.shape, "target": target.shape})
    diff = F.sub(prediction, target)
    return F.mean_all(F.mul(diff, diff))
