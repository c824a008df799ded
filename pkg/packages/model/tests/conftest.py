import math

import numpy as np
import pytest

from semcomm_common.enums import HeadKind, LossKind, MetricKind, Modality
from semcomm_model.config import TaskSpec
from semcomm_model.gradcheck import small_model_config


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    return small_model_config()


@pytest.fixture
def image_task():
    return TaskSpec(
        id=0,
        name="img",
        modalities=(Modality.IMAGE,),
        head=HeadKind.CLASS_VEC,
        loss=LossKind.CROSS_ENTROPY,
        metric=MetricKind.ACCURACY,
        num_outputs=4,
    )


@pytest.fixture
def fused_task():
    return TaskSpec(
        id=1,
        name="xor",
        modalities=(Modality.IMAGE, Modality.TEXT),
        head=HeadKind.CLASS_VEC,
        loss=LossKind.CROSS_ENTROPY,
        metric=MetricKind.ACCURACY,
        num_outputs=2,
    )


def _norm(x, params):
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    return (x - mu) / np.sqrt(var + params.eps) * params.gain.data + params.bias.data


def _affine(x, linear):
    return x @ linear.weight.data + linear.bias.data


def _gelu(x):
    return 0.5 * x * (1.0 + np.tanh(math.sqrt(2.0 / math.pi) * (x + 0.044715 * x**3)))


def _reference_layer(layer, h, mask=None):
    q, k, v = _affine(h, layer.query), _affine(h, layer.key), _affine(h, layer.value)
    heads = []
    for i in range(layer.num_heads):
        cols = slice(i * layer.head_width, (i + 1) * layer.head_width)
        scores = q[:, cols] @ k[:, cols].T * layer.scale
        if mask is not None:
            scores = np.where(mask, scores, -np.inf)
        weights = np.exp(scores - scores.max(axis=1, keepdims=True))
        heads.append(weights / weights.sum(axis=1, keepdims=True) @ v[:, cols])
    h1 = _norm(_affine(np.concatenate(heads, axis=1), layer.out) + h, layer.norm1)
    return _norm(_affine(_gelu(_affine(h1, layer.ffn1)), layer.ffn2) + h1, layer.norm2)


@pytest.fixture
def reference_layer():
    """Plain-numpy post-norm attention layer reading a layer's parameters."""
    return _reference_layer


def _randomize(module, rng, scale=0.5):
    for p in module.parameters():
        p.data[...] = rng.normal(0.0, scale, size=p.shape)


@pytest.fixture
def randomized():
    """Overwrite every parameter (gains and biases included) with random values."""
    return _randomize
