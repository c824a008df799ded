"""
Central finite-difference checks of every differentiable operation and of the
full fused pipeline. Inputs are drawn uniformly from [-2, 2] in float64.

An entry passes when |autodiff - numeric| <= ABS_FLOOR, or when its relative
error |autodiff - numeric| / max(|autodiff|, |numeric|) is below REL_TOL.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from semcomm_common.enums import ChannelKind, HeadKind, LossKind, MetricKind, Modality

from . import functional as F
from .attention import AttentionLayer
from .channel import PowerNormalize, RayleighFade
from .config import (
    ChannelConfig,
    FusionConfig,
    ImageGeometry,
    ModelConfig,
    SpeechGeometry,
    TaskSpec,
    TextGeometry,
    VideoEmbeddingConfig,
)
from .losses import binary_cross_entropy_multilabel, cross_entropy_loss, cross_entropy_rows, ctc_loss, mse_loss
from .system import build_system
from .tasks import compute_loss
from .tensor import Tensor, backward

logger = logging.getLogger(__name__)

STEP = 1e-5
REL_TOL = 1e-4
ABS_FLOOR = 1e-7


@dataclass
class GradCheckRecord:
    name: str
    max_rel_err: float
    passed: bool
    entries: int = 0


def relative_errors(analytic: np.ndarray, numeric: np.ndarray, abs_floor: float = ABS_FLOOR) -> np.ndarray:
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    rel = np.divide(diff, scale, out=np.zeros_like(diff), where=scale > 0)
    return np.where(diff <= abs_floor, 0.0, rel)


def numeric_gradient(
    loss_fn: Callable[[], Tensor],
    tensor: Tensor,
    step: float = STEP,
    entries: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Central differences of loss_fn() w.r.t. tensor, at `entries` (flat indices) or everywhere."""
    flat = tensor.data.reshape(-1)
    grad = np.zeros(flat.size)
    for i in range(flat.size) if entries is None else entries:
        original = flat[i]
        flat[i] = original + step
        up = loss_fn().item()
        flat[i] = original - step
        down = loss_fn().item()
        flat[i] = original
        grad[i] = (up - down) / (2.0 * step)
    return grad.reshape(tensor.shape)


def check_gradients(
    name: str,
    loss_fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    rng: Optional[np.random.Generator] = None,
    max_entries: Optional[int] = None,
    step: float = STEP,
    rel_tol: float = REL_TOL,
) -> GradCheckRecord:
    """
    Compare autodiff against central differences for every tensor in `tensors`.
    With `max_entries`, each tensor is checked at that many randomly chosen entries.
    """
    for t in tensors:
        t.grad = None
    backward(loss_fn())
    worst = 0.0
    checked = 0
    for t in tensors:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        entries = None
        if max_entries is not None and t.size > max_entries:
            assert rng is not None
            entries = sorted(rng.choice(t.size, size=max_entries, replace=False).tolist())
        numeric = numeric_gradient(loss_fn, t, step, entries)
        a, n = analytic.reshape(-1), numeric.reshape(-1)
        if entries is not None:
            a, n = a[entries], n[entries]
        errs = relative_errors(a, n)
        checked += errs.size
        worst = max(worst, float(errs.max(initial=0.0)))
    record = GradCheckRecord(name, worst, worst < rel_tol, checked)
    level = logging.DEBUG if record.passed else logging.WARNING
    logger.log(level, "gradcheck %s: max rel err %.3e over %d entries", name, worst, checked)
    return record


def _param(rng: np.random.Generator, *shape: int) -> Tensor:
    return Tensor(rng.uniform(-2.0, 2.0, size=shape), requires_grad=True)


def _weighted(out: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar probe sum(out * W) with fixed random W."""
    return F.sum_all(F.mul(out, Tensor(weights)))


def _probe(rng: np.random.Generator, fn: Callable[[], Tensor]) -> Callable[[], Tensor]:
    weights = rng.uniform(-1.0, 1.0, size=fn().shape)
    return lambda: _weighted(fn(), weights)


def op_checks(rng: np.random.Generator) -> List[GradCheckRecord]:
    records = []

    a, b = _param(rng, 3, 4), _param(rng, 4, 2)
    records.append(check_gradients("matmul", _probe(rng, lambda: F.matmul(a, b)), [a, b]))

    x, row = _param(rng, 4, 3), _param(rng, 3)
    for kind in ("add", "sub", "mul"):
        records.append(check_gradients(f"elementwise_{kind}_broadcast", _probe(rng, lambda k=kind: F.elementwise(k, x, row)), [x, row]))
    y = _param(rng, 4, 3)
    records.append(check_gradients("elementwise_mul", _probe(rng, lambda: F.mul(x, y)), [x, y]))

    s = _param(rng, 3, 5)
    records.append(check_gradients("softmax_rows", _probe(rng, lambda: F.softmax_rows(s)), [s]))
    mask = rng.uniform(size=(3, 5)) > 0.4
    mask[:, 0] = True
    records.append(check_gradients("softmax_rows_masked", _probe(rng, lambda: F.softmax_rows(s, mask)), [s]))

    ln_x, gain, bias = _param(rng, 5, 8), _param(rng, 8), _param(rng, 8)
    records.append(check_gradients("layer_norm", _probe(rng, lambda: F.layer_norm(ln_x, gain, bias, 1e-5)), [ln_x, gain, bias]))

    g = _param(rng, 4, 4)
    records.append(check_gradients("gelu", _probe(rng, lambda: F.gelu(g)), [g]))

    img, kern, kb = _param(rng, 2, 5, 5), _param(rng, 3, 2, 3, 3), _param(rng, 3)
    records.append(check_gradients("conv2d", _probe(rng, lambda: F.conv2d(img, kern, kb, stride=2, padding=1)), [img, kern, kb]))

    seq, ck, cb = _param(rng, 6, 2), _param(rng, 3, 2, 3), _param(rng, 3)
    records.append(check_gradients("causal_conv1d", _probe(rng, lambda: F.causal_conv1d(seq, ck, cb, stride=2)), [seq, ck, cb]))

    t = _param(rng, 2, 3, 4)
    records.append(check_gradients("reshape_permute_index", _probe(rng, lambda: F.permute(F.reshape(t, (6, 4)), (1, 0))[1:3]), [t]))
    u, v = _param(rng, 2, 3), _param(rng, 4, 3)
    records.append(check_gradients("concat", _probe(rng, lambda: F.concat([u, v], axis=0)), [u, v]))
    records.append(check_gradients("mean_rows", _probe(rng, lambda: F.mean_rows(v)), [v]))
    table = _param(rng, 5, 3)
    records.append(check_gradients("take_rows", _probe(rng, lambda: F.take_rows(table, [4, 0, 4])), [table]))

    layer = AttentionLayer(8, 2, rng)
    h = _param(rng, 3, 8)
    records.append(check_gradients("attention_layer", _probe(rng, lambda: layer(h)), [h] + layer.parameters()))

    sym = _param(rng, 3, 4)
    records.append(check_gradients("power_normalize", _probe(rng, lambda: PowerNormalize.apply(sym)), [sym]))
    odd = _param(rng, 3, 3)
    noise = rng.normal(size=5) + 1j * rng.normal(size=5)
    fading = complex(rng.normal(), rng.normal())
    for equalize in (True, False):
        records.append(
            check_gradients(
                f"rayleigh_equalize_{str(equalize).lower()}",
                _probe(rng, lambda e=equalize: RayleighFade.apply(odd, h=fading, noise=noise, equalize=e)),
                [odd],
            )
        )

    logits = _param(rng, 6)
    records.append(check_gradients("cross_entropy", lambda: cross_entropy_loss(logits, 2), [logits]))
    rows = _param(rng, 4, 5)
    records.append(check_gradients("cross_entropy_rows", lambda: cross_entropy_rows(rows, [0, 4, 2, 2]), [rows]))
    records.append(check_gradients("binary_cross_entropy", lambda: binary_cross_entropy_multilabel(logits, [1, 0, 0, 1, 1, 0]), [logits]))
    frames = _param(rng, 5, 4)
    records.append(check_gradients("ctc", lambda: ctc_loss(frames, [0, 2, 2]), [frames]))
    recon, target = _param(rng, 3, 4), rng.uniform(-2.0, 2.0, size=(3, 4))
    records.append(check_gradients("mse", lambda: mse_loss(recon, Tensor(target)), [recon]))
    return records


def small_model_config() -> ModelConfig:
    return ModelConfig(
        width=12,
        encoder_layers=1,
        encoder_heads=4,
        image=ImageGeometry(channels=2, height=8, width=8, conv_channels=4),
        text=TextGeometry(vocab_size=8, seq_len=3, segments=2),
        speech=SpeechGeometry(frame=64, hop=32, n_filters=4, raw_len=160),
        video=VideoEmbeddingConfig(frames=2, channels=1, height=4, width=4, tube_frames=1, tube_height=2, tube_width=2),
        fusion=FusionConfig(num_layers=6, num_heads=12, fallback_heads=4),
    )


def pipeline_check(rng: np.random.Generator, max_entries: Optional[int] = 3, seed: int = 0) -> GradCheckRecord:
    """Fused image+text classification through an AWGN channel with a frozen noise realization."""
    config = small_model_config()
    spec = TaskSpec(
        id=0,
        name="pipeline",
        modalities=(Modality.IMAGE, Modality.TEXT),
        head=HeadKind.CLASS_VEC,
        loss=LossKind.CROSS_ENTROPY,
        metric=MetricKind.ACCURACY,
        num_outputs=3,
        hidden=5,
    )
    system = build_system(config, [spec], seed)
    inputs = {
        Modality.IMAGE: rng.uniform(-2.0, 2.0, size=(2, 8, 8)),
        Modality.TEXT: [3, 5, 2],
    }
    channel = ChannelConfig(kind=ChannelKind.AWGN, snr_db=12.0, seed=seed)

    def loss() -> Tensor:
        result = system.forward(spec.id, inputs, channel, np.random.default_rng(seed))
        return compute_loss(spec, result.output, 1)

    return check_gradients("fused_pipeline", loss, system.parameters(), rng, max_entries=max_entries)


def run_suite(seed: int = 0, pipeline_entries: Optional[int] = 3) -> List[GradCheckRecord]:
    rng = np.random.default_rng(seed)
    records = op_checks(rng)
    records.append(pipeline_check(rng, pipeline_entries, seed))
    return records
