"""The pooling block: layer norm over a stacked 2 x 126 pair, then a stack of
1D convolution blocks (conv -> activation -> batchnorm) down to one channel.

Everything runs in float64. Batchnorm always uses stored running statistics,
so the block is a pure per-item function.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, NumericError

SIGNAL_LENGTH = 126
LN_EPS = 1e-5
BN_EPS = 1e-5
ACTIVATIONS = ("identity", "tanh")

DEFAULT_ARCH = (
    {"in_channels": 2, "out_channels": 8, "kernel_size": 3, "activation": "tanh", "batchnorm": True},
    {"in_channels": 8, "out_channels": 8, "kernel_size": 3, "activation": "tanh", "batchnorm": True},
    {"in_channels": 8, "out_channels": 1, "kernel_size": 3, "activation": "tanh", "batchnorm": True},
)


def _frozen(a, shape, what):
    a = np.array(a, dtype=np.float64)
    if a.shape != shape:
        raise ConfigurationError(f"{what} has shape {a.shape}, expected {shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigurationError(f"{what} contains non-finite values")
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class BatchNorm:
    running_mean: np.ndarray
    running_var: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    epsilon: float = BN_EPS

    def __post_init__(self):
        n = np.size(self.running_mean)
        for name in ("running_mean", "running_var", "gamma", "beta"):
            object.__setattr__(self, name, _frozen(np.ravel(getattr(self, name)), (n,),
                                                   f"batchnorm.{name}"))
        if not np.all(self.running_var > 0):
            raise ConfigurationError("batchnorm.running_var entries must be > 0")
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ConfigurationError("batchnorm.epsilon must be finite and >= 0")
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def scale(self) -> np.ndarray:
        return self.gamma / np.sqrt(self.running_var + self.epsilon)

    @classmethod
    def neutral(cls, channels: int) -> "BatchNorm":
        return cls(np.zeros(channels), np.ones(channels), np.ones(channels), np.zeros(channels))


@dataclass(frozen=True, eq=False)
class ConvLayer:
    in_channels: int
    out_channels: int
    kernel_size: int
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "identity"
    batchnorm: Optional[BatchNorm] = None

    def __post_init__(self):
        cin, cout, k = int(self.in_channels), int(self.out_channels), int(self.kernel_size)
        if cin < 1 or cout < 1:
            raise ConfigurationError("conv channel counts must be >= 1")
        if k < 1 or k % 2 == 0:
            raise ConfigurationError(f"kernel_size must be a positive odd integer, got {k}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        object.__setattr__(self, "in_channels", cin)
        object.__setattr__(self, "out_channels", cout)
        object.__setattr__(self, "kernel_size", k)
        object.__setattr__(self, "weights", _frozen(self.weights, (cout, cin, k), "weights"))
        object.__setattr__(self, "bias", _frozen(np.ravel(self.bias), (cout,), "bias"))
        if self.batchnorm is not None and self.batchnorm.running_mean.shape != (cout,):
            raise ConfigurationError("batchnorm size must equal out_channels")

    @property
    def padding(self) -> int:
        return (self.kernel_size - 1) // 2


@dataclass(frozen=True, eq=False)
class PoolingParams:
    conv_layers: tuple
    normalize: bool = False
    ln_gamma: np.ndarray = field(default_factory=lambda: np.ones((2, SIGNAL_LENGTH)))
    ln_beta: np.ndarray = field(default_factory=lambda: np.zeros((2, SIGNAL_LENGTH)))

    def __post_init__(self):
        layers = tuple(self.conv_layers)
        if not layers:
            raise ConfigurationError("pooling block needs at least one conv layer")
        if layers[0].in_channels != 2:
            raise ConfigurationError("first conv layer must take 2 input channels")
        if layers[-1].out_channels != 1:
            raise ConfigurationError("last conv layer must produce 1 output channel")
        for i, (a, b) in enumerate(zip(layers, layers[1:])):
            if a.out_channels != b.in_channels:
                raise ConfigurationError(
                    f"conv layer {i} outputs {a.out_channels} channels but layer {i + 1} "
                    f"expects {b.in_channels}")
        object.__setattr__(self, "conv_layers", layers)
        object.__setattr__(self, "normalize", bool(self.normalize))
        shape = (2, SIGNAL_LENGTH)
        object.__setattr__(self, "ln_gamma", _frozen(self.ln_gamma, shape, "ln_gamma"))
        object.__setattr__(self, "ln_beta", _frozen(self.ln_beta, shape, "ln_beta"))

    @property
    def is_linear(self) -> bool:
        return (not self.normalize
                and all(l.activation == "identity" and l.batchnorm is None for l in self.conv_layers))


def _pair_array(pair):
    x = np.asarray(pair, dtype=np.float64)
    if x.shape[-2:] != (2, SIGNAL_LENGTH):
        raise ConfigurationError(f"pooling input must be (..., 2, {SIGNAL_LENGTH}), got {x.shape}")
    return x


def _conv(x, layer: ConvLayer):
    p = layer.padding
    length = x.shape[-1]
    xpad = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(p, p)])
    y = np.zeros(x.shape[:-2] + (layer.out_channels, length))
    for k in range(layer.kernel_size):
        y += np.einsum("oi,...it->...ot", layer.weights[:, :, k], xpad[..., k:k + length])
    return y + layer.bias[:, None]


def _conv_backward(g, layer: ConvLayer):
    p = layer.padding
    length = g.shape[-1]
    gpad = np.pad(g, [(0, 0)] * (g.ndim - 1) + [(p, p)])
    gx = np.zeros(g.shape[:-2] + (layer.in_channels, length))
    for k in range(layer.kernel_size):
        start = 2 * p - k
        gx += np.einsum("oi,...ot->...it", layer.weights[:, :, k], gpad[..., start:start + length])
    return gx


def _forward(x, params: PoolingParams):
    if x.shape[-2] != params.conv_layers[0].in_channels:
        raise ConfigurationError("input channel count does not match the first conv layer")
    cache = {}
    if params.normalize:
        mu = x.mean(axis=(-2, -1), keepdims=True)
        var = ((x - mu) ** 2).mean(axis=(-2, -1), keepdims=True)
        inv_std = 1.0 / np.sqrt(var + LN_EPS)
        xhat = (x - mu) * inv_std
        cache["ln"] = (xhat, inv_std)
        x = xhat * params.ln_gamma + params.ln_beta
    acts = []
    for layer in params.conv_layers:
        x = _conv(x, layer)
        if layer.activation == "tanh":
            x = np.tanh(x)
        acts.append(x)
        if layer.batchnorm is not None:
            bn = layer.batchnorm
            x = (x - bn.running_mean[:, None]) * bn.scale[:, None] + bn.beta[:, None]
        if not np.all(np.isfinite(x)):
            raise NumericError("pooling block produced non-finite values")
    cache["acts"] = acts
    return x[..., 0, :], cache


def pooling_block(pair, params: PoolingParams) -> np.ndarray:
    """Map a stacked ``(..., 2, 126)`` pair to a ``(..., 126)`` vector."""
    x = _pair_array(pair)
    if not np.all(np.isfinite(x)):
        raise NumericError("pooling input contains non-finite values")
    return _forward(x, params)[0]


def pooling_jacobian_analytic(pair, params: PoolingParams) -> np.ndarray:
    """Exact ``126 x 252`` Jacobian by reverse-mode accumulation.

    Column ``c`` is the derivative with respect to the flattened pair, row 0
    first, so the result reads ``[d/d row0 | d/d row1]``.
    """
    x = _pair_array(pair)
    if x.ndim != 2:
        raise ConfigurationError("Jacobian is defined for a single pair")
    _, cache = _forward(x, params)
    n = SIGNAL_LENGTH
    # one cotangent row per output coordinate
    g = np.eye(n)[:, None, :]
    for layer, act in zip(reversed(params.conv_layers), reversed(cache["acts"])):
        if layer.batchnorm is not None:
            g = g * layer.batchnorm.scale[:, None]
        if layer.activation == "tanh":
            g = g * (1.0 - act ** 2)
        g = _conv_backward(g, layer)
    if params.normalize:
        xhat, inv_std = cache["ln"]
        gh = g * params.ln_gamma
        g = inv_std * (gh - gh.mean(axis=(-2, -1), keepdims=True)
                       - xhat * (gh * xhat).mean(axis=(-2, -1), keepdims=True))
    return g.reshape(n, 2 * n)


def pooling_jacobian_fd(pair, params: PoolingParams, eps: float = 1e-4) -> np.ndarray:
    """Central-difference Jacobian, all 252 perturbations evaluated as one batch."""
    if not eps > 0:
        raise ConfigurationError("eps must be > 0")
    x = _pair_array(pair)
    flat = x.reshape(-1)
    m = flat.size
    plus = flat + eps * np.eye(m)
    minus = flat - eps * np.eye(m)
    # divide by the step actually taken after rounding x +/- eps
    step = np.diagonal(plus) - np.diagonal(minus)
    shape = (m,) + x.shape
    fp = pooling_block(plus.reshape(shape), params)
    fm = pooling_block(minus.reshape(shape), params)
    return ((fp - fm) / step[:, None]).T


def jacobian_relative_error(analytic, numeric, rel_floor: float = 1e-4) -> float:
    """Max elementwise ``|a - n| / max(|a|, |n|, rel_floor * max|a|)``.

    The floor keeps entries many orders below the Jacobian's scale, where
    finite differences only resolve roundoff, from dominating the maximum.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = np.max(np.abs(a)) if a.size else 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), max(rel_floor * scale, 1e-300))
    return float(np.max(np.abs(a - n) / denom))


def _arch_entry(spec, i):
    if isinstance(spec, ConvLayer):
        spec = {"in_channels": spec.in_channels, "out_channels": spec.out_channels,
                "kernel_size": spec.kernel_size, "activation": spec.activation,
                "batchnorm": spec.batchnorm is not None}
    try:
        return (int(spec["in_channels"]), int(spec["out_channels"]), int(spec["kernel_size"]),
                spec.get("activation", "tanh"), bool(spec.get("batchnorm", True)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"arch entry {i} is malformed: {exc}") from None


def init_params(seed: int, arch: Sequence = DEFAULT_ARCH, normalize: bool = True) -> PoolingParams:
    """Deterministic fan-in uniform initialization, ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
    gen = np.random.Generator(np.random.Philox(key=np.array([int(seed) & (2**64 - 1), 0xC0],
                                                            dtype=np.uint64)))
    layers = []
    for i, spec in enumerate(arch):
        cin, cout, k, act, use_bn = _arch_entry(spec, i)
        if k < 1 or k % 2 == 0:
            raise ConfigurationError(f"arch entry {i}: kernel_size must be odd")
        bound = 1.0 / np.sqrt(cin * k)
        w = gen.uniform(-bound, bound, size=(cout, cin, k))
        b = gen.uniform(-bound, bound, size=cout)
        bn = BatchNorm.neutral(cout) if use_bn else None
        layers.append(ConvLayer(cin, cout, k, w, b, act, bn))
    return PoolingParams(tuple(layers), normalize=normalize)


def passthrough_params() -> PoolingParams:
    """Single 1x1 conv selecting row 0 (the current primitive)."""
    return ema_params(1.0)


def ema_params(alpha: float) -> PoolingParams:
    """Single 1x1 conv computing ``alpha * row0 + (1 - alpha) * row1``."""
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ConfigurationError(f"ema alpha must lie in (0, 1], got {alpha}")
    w = np.array([[[alpha], [1.0 - alpha]]])
    return PoolingParams((ConvLayer(2, 1, 1, w, np.zeros(1)),), normalize=False)
