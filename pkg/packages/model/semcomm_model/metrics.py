"""
Evaluation metrics. All operate on plain arrays or sequences and return floats;
nothing here records on a tape.
"""

import logging
import math
from collections import Counter
from typing import Hashable, List, Sequence

import numpy as np

from semcomm_common.exceptions import ContractError

from .tensor import Tensor

logger = logging.getLogger(__name__)

PSNR_CAP_DB = 100.0
BLEU_MAX_ORDER = 4


def _values(x: "Tensor | np.ndarray | Sequence[float]") -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def ctc_greedy_decode(logit_rows: "Tensor | np.ndarray") -> List[int]:
    """Argmax per row, collapse repeats, drop blanks (the last column)."""
    z = _values(logit_rows)
    blank = z.shape[1] - 1
    best = np.argmax(z, axis=1)
    decoded: List[int] = []
    previous = None
    for symbol in best.tolist():
        if symbol != previous and symbol != blank:
            decoded.append(symbol)
        previous = symbol
    return decoded


def metric_accuracy(preds: Sequence[Hashable], refs: Sequence[Hashable]) -> float:
    if len(preds) != len(refs):
        raise ContractError("accuracy needs one prediction per reference", {"preds": len(preds), "refs": len(refs)})
    if not refs:
        return 0.0
    return sum(1 for p, r in zip(preds, refs) if p == r) / len(refs)


def edit_distance(hyp: Sequence[Hashable], ref: Sequence[Hashable]) -> int:
    """Word-level Levenshtein distance."""
    row = list(range(len(ref) + 1))
    for i, h in enumerate(hyp, start=1):
        diagonal, row[0] = row[0], i
        for j, r in enumerate(ref, start=1):
            diagonal, row[j] = row[j], min(row[j] + 1, row[j - 1] + 1, diagonal + (h != r))
    return row[-1]


def metric_word_accuracy(preds: Sequence[Sequence[Hashable]], refs: Sequence[Sequence[Hashable]]) -> float:
    """Mean over samples of 1 - edit_distance/len(ref), clamped to [0, 1]. Empty references are skipped."""
    if len(preds) != len(refs):
        raise ContractError("word accuracy needs one hypothesis per reference", {"preds": len(preds), "refs": len(refs)})
    scores = []
    for hyp, ref in zip(preds, refs):
        if not ref:
            logger.warning("skipping sample with an empty reference transcription")
            continue
        scores.append(min(1.0, max(0.0, 1.0 - edit_distance(hyp, ref) / len(ref))))
    return float(np.mean(scores)) if scores else 0.0


def _ngrams(tokens: Sequence[Hashable], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def metric_bleu(candidate: Sequence[Hashable], reference: Sequence[Hashable], max_order: int = BLEU_MAX_ORDER) -> float:
    """
    Sentence BLEU: geometric mean of clipped n-gram precisions (n = 1..max_order,
    uniform weights) times the brevity penalty. Unsmoothed, so any order without
    a match scores 0.
    """
    if not reference:
        raise ContractError("BLEU needs a non-empty reference")
    if not candidate:
        return 0.0
    log_precision = 0.0
    for n in range(1, max_order + 1):
        cand = _ngrams(candidate, n)
        total = sum(cand.values())
        if total == 0:
            return 0.0
        matched = sum((cand & _ngrams(reference, n)).values())
        if matched == 0:
            return 0.0
        log_precision += math.log(matched / total) / max_order
    penalty = 1.0 if len(candidate) >= len(reference) else math.exp(1.0 - len(reference) / len(candidate))
    return penalty * math.exp(log_precision)


def corpus_bleu(candidates: Sequence[Sequence[Hashable]], references: Sequence[Sequence[Hashable]]) -> float:
    """Sentence BLEU averaged over the set."""
    if len(candidates) != len(references):
        raise ContractError("BLEU needs one candidate per reference")
    if not references:
        return 0.0
    return float(np.mean([metric_bleu(c, r) for c, r in zip(candidates, references)]))


def metric_f1(preds: "np.ndarray | Sequence[Sequence[int]]", targets: "np.ndarray | Sequence[Sequence[int]]", average: str = "micro") -> float:
    p = np.asarray(preds, dtype=bool)
    t = np.asarray(targets, dtype=bool)
    if p.shape != t.shape:
        raise ContractError("F1 needs equal shapes", {"preds": p.shape, "targets": t.shape})
    if average == "macro":
        columns = p.reshape(-1, p.shape[-1]).T, t.reshape(-1, t.shape[-1]).T
        return float(np.mean([_f1(pc, tc) for pc, tc in zip(*columns)]))
    return _f1(p, t)


def _f1(p: np.ndarray, t: np.ndarray) -> float:
    tp = int(np.sum(p & t))
    fp = int(np.sum(p & ~t))
    fn = int(np.sum(~p & t))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def threshold_logits(logits: "Tensor | np.ndarray") -> np.ndarray:
    """Multi-label decisions: sigmoid(z) > 0.5, i.e. z > 0."""
    return (_values(logits) > 0.0).astype(np.int64)


def metric_psnr(original: "Tensor | np.ndarray", reconstruction: "Tensor | np.ndarray", max_val: float = 1.0) -> float:
    """20·log10(max_val) - 10·log10(MSE) in dB; +inf when the inputs are identical."""
    a, b = _values(original), _values(reconstruction)
    if a.shape != b.shape:
        raise ContractError("PSNR needs equal shapes", {"original": a.shape, "reconstruction": b.shape})
    if max_val <= 0:
        raise ContractError("PSNR needs max_val > 0", {"max_val": max_val})
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 20.0 * math.log10(max_val) - 10.0 * math.log10(mse)


def cap_psnr(value: float) -> float:
    return min(value, PSNR_CAP_DB)
