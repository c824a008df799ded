"""
Channel encoder, physical channel and channel decoder.

    encode   P -> P/2 (GeLU) -> d, then normalize the block to unit mean-square
    channel  AWGN: x + n. Rayleigh: pairs of reals become complex symbols, one
             flat coefficient h ~ CN(0, 1) per block, complex noise, optional
             division by h at the receiver (perfect CSI)
    decode   d -> P/2 (GeLU) -> P

SNR is mean symbol power over noise variance per real dimension:
σ² = signal_power / 10^(snr_db / 10).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from semcomm_common.enums import ChannelKind
from semcomm_common.exceptions import ConfigurationError, ContractError

from . import functional as F
from .config import ChannelConfig
from .nn import Linear, Module
from .tensor import Function, Tensor

logger = logging.getLogger(__name__)

NOMINAL_POWER = 1.0


@dataclass
class SymbolBlock:
    symbols: Tensor
    signal_power: float
    degenerate: bool = False

    @property
    def count(self) -> int:
        return self.symbols.size


class PowerNormalize(Function):
    """y = x / sqrt(mean(x²)); an all-zero block passes through unchanged."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        self.rms = float(np.sqrt(np.mean(x * x)))
        if self.rms == 0.0:
            return x.copy()
        return x / self.rms

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        if self.rms == 0.0:
            return (grad,)
        x, r, n = self.x, self.rms, self.x.size
        return (grad / r - x * float(np.sum(grad * x)) / (n * r**3),)


def snr_linear(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


def noise_variance(signal_power: float, snr_db: float) -> float:
    return signal_power / snr_linear(snr_db)


class ChannelEncoder(Module):
    def __init__(self, width: int, compressed_width: int, rng: np.random.Generator) -> None:
        if compressed_width >= width or compressed_width < 1:
            raise ConfigurationError(
                f"compressed width d={compressed_width} must be smaller than P={width}", field="compressed_width"
            )
        self.width = width
        self.compressed_width = compressed_width
        self.layer1 = Linear(width, width // 2, rng)
        self.layer2 = Linear(width // 2, compressed_width, rng)

    def compress(self, f: Tensor) -> Tensor:
        return self.layer2(F.gelu(self.layer1(f)))

    def __call__(self, f: Tensor) -> SymbolBlock:
        if f.ndim != 2 or f.shape[0] < 1:
            raise ContractError("channel_encode needs an L×P matrix with L ≥ 1", {"shape": f.shape})
        symbols = PowerNormalize.apply(self.compress(f))
        power = float(np.mean(symbols.data**2))
        if power == 0.0:
            logger.warning("all-zero symbol block (%s); transmitting with nominal power %.1f", f.shape, NOMINAL_POWER)
            return SymbolBlock(symbols, NOMINAL_POWER, degenerate=True)
        return SymbolBlock(symbols, power)


class ChannelDecoder(Module):
    def __init__(self, width: int, compressed_width: int, rng: np.random.Generator) -> None:
        self.layer1 = Linear(compressed_width, width // 2, rng)
        self.layer2 = Linear(width // 2, width, rng)

    def __call__(self, received: Tensor) -> Tensor:
        return self.layer2(F.gelu(self.layer1(received)))


def channel_encode(f: Tensor, encoder: ChannelEncoder) -> SymbolBlock:
    return encoder(f)


def channel_decode(received: Tensor, decoder: ChannelDecoder) -> Tensor:
    return decoder(received)


# ----------------------------------------------------------------------
# Physical channel
# ----------------------------------------------------------------------


class RayleighFade(Function):
    """
    Flat Rayleigh fading over a real block. `h` and `noise` are constants of the
    realization; the gradient w.r.t. the symbols is the identity when the
    receiver equalizes and multiplication by conj(h) otherwise.
    """

    def forward(
        self,
        x: np.ndarray,
        h: complex = 1.0 + 0.0j,
        noise: Optional[np.ndarray] = None,
        equalize: bool = True,
    ) -> np.ndarray:
        self.shape = x.shape
        self.h = h
        self.equalize = equalize
        flat = x.reshape(-1)
        self.padded = flat.size % 2 == 1
        if self.padded:
            flat = np.concatenate([flat, [0.0]])
        z = flat[0::2] + 1j * flat[1::2]
        y = h * z + (noise if noise is not None else 0.0)
        if equalize:
            y = y / h
        out = np.empty(flat.size)
        out[0::2], out[1::2] = y.real, y.imag
        if self.padded:
            out = out[:-1]
        return out.reshape(self.shape)

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        if self.equalize:
            return (grad,)
        flat = grad.reshape(-1)
        if self.padded:
            flat = np.concatenate([flat, [0.0]])
        g = np.conj(self.h) * (flat[0::2] + 1j * flat[1::2])
        out = np.empty(flat.size)
        out[0::2], out[1::2] = g.real, g.imag
        if self.padded:
            out = out[:-1]
        return (out.reshape(self.shape),)


def draw_fading(rng: np.random.Generator) -> complex:
    """h ~ CN(0, 1): independent real and imaginary parts with variance 1/2 each."""
    re, im = rng.normal(0.0, np.sqrt(0.5), size=2)
    return complex(re, im)


def apply_channel(
    block: SymbolBlock, cfg: ChannelConfig, rng: Optional[np.random.Generator] = None
) -> Tensor:
    """
    Pass a power-normalized block through the configured channel. Callers that
    sweep many blocks pass one Generator so realizations advance; without one,
    a fresh Generator seeded from cfg.seed is used.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    x = block.symbols
    sigma2 = noise_variance(block.signal_power, cfg.snr_db)
    if cfg.kind is ChannelKind.AWGN:
        noise = Tensor(rng.normal(0.0, np.sqrt(sigma2), size=x.shape))
        return F.add(x, noise)

    count = x.size
    if count % 2:
        logger.debug("odd symbol count %d under Rayleigh fading; padding one zero symbol", count)
    pairs = (count + 1) // 2
    h = draw_fading(rng)
    # complex noise of variance 2σ², i.e. σ² per real dimension
    noise = rng.normal(0.0, np.sqrt(sigma2), size=pairs) + 1j * rng.normal(0.0, np.sqrt(sigma2), size=pairs)
    return RayleighFade.apply(x, h=h, noise=noise, equalize=cfg.equalize)
