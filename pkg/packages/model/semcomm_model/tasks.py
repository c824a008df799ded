"""
Per-task glue between head outputs, targets and metrics: which loss a task
trains with, how its outputs become predictions, and how predictions score.
"""

import logging
from typing import Any, List, Sequence

import numpy as np

from semcomm_common.enums import HeadKind, LossKind, MetricKind
from semcomm_common.exceptions import ContractError

from . import functional as F
from . import metrics as M
from .config import TaskSpec
from .losses import binary_cross_entropy_multilabel, cross_entropy_loss, cross_entropy_rows, ctc_loss, mse_loss
from .tensor import Tensor

logger = logging.getLogger(__name__)


def compute_loss(spec: TaskSpec, output: Tensor, target: Any) -> Tensor:
    if spec.loss is LossKind.CROSS_ENTROPY:
        if spec.head is HeadKind.CLASS_SEQ:
            return cross_entropy_rows(output, list(target))
        return cross_entropy_loss(output, int(target))
    if spec.loss is LossKind.BINARY_CROSS_ENTROPY:
        return binary_cross_entropy_multilabel(output, target)
    if spec.loss is LossKind.CTC:
        return ctc_loss(output, list(target))
    if spec.loss is LossKind.MSE:
        expected = np.asarray(target, dtype=np.float64)
        prediction = F.reshape(output, expected.shape) if output.size == expected.size else output
        return mse_loss(prediction, Tensor(expected))
    raise ContractError("unsupported loss", {"loss": spec.loss})


def predict(spec: TaskSpec, output: Tensor) -> Any:
    z = output.data
    if spec.head is HeadKind.CLASS_VEC:
        if spec.loss is LossKind.BINARY_CROSS_ENTROPY:
            return M.threshold_logits(z.reshape(-1)).tolist()
        return int(np.argmax(z.reshape(-1)))
    if spec.head is HeadKind.CLASS_SEQ:
        if spec.loss is LossKind.CTC:
            return M.ctc_greedy_decode(z)
        return np.argmax(z, axis=1).tolist()
    if spec.head is HeadKind.RECON_IMAGE and spec.image_shape is not None:
        return z.reshape(spec.image_shape)
    return z


def score(spec: TaskSpec, preds: Sequence[Any], refs: Sequence[Any]) -> float:
    """P_i(Ŷ_i, Y_i) over a whole evaluation set."""
    if len(preds) != len(refs):
        raise ContractError("one prediction per reference", {"preds": len(preds), "refs": len(refs)})
    metric = spec.metric
    if metric is MetricKind.ACCURACY:
        if spec.head is HeadKind.CLASS_SEQ:
            return M.metric_accuracy([tuple(p) for p in preds], [tuple(r) for r in refs])
        return M.metric_accuracy(list(preds), [int(r) for r in refs])
    if metric is MetricKind.WORD_ACCURACY:
        return M.metric_word_accuracy(list(preds), [list(r) for r in refs])
    if metric is MetricKind.BLEU:
        return M.corpus_bleu(list(preds), [list(r) for r in refs])
    if metric is MetricKind.F1:
        return M.metric_f1(np.asarray(preds), np.asarray(refs))
    if metric is MetricKind.PSNR:
        values: List[float] = [M.metric_psnr(r, p, spec.max_val) for p, r in zip(preds, refs)]
        return float(np.mean(values)) if values else 0.0
    raise ContractError("unsupported metric", {"metric": metric})
