"""Reproducible Gaussian noise from a counter-based generator.

Each (seed, stream_index) pair keys an independent Philox stream; channel c
of a draw is the c-th standard normal of that stream. Nothing depends on
evaluation order, batch layout or how many other streams were consumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class NoiseConfig:
    threshold: float = 0.0
    seed: int = 0
    enabled: bool = True

    def __post_init__(self):
        t = float(self.threshold)
        if not np.isfinite(t) or t < 0:
            raise ConfigurationError(f"noise threshold must be finite and >= 0, got {self.threshold}")
        object.__setattr__(self, "threshold", t)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def active(self) -> bool:
        return self.enabled and self.threshold > 0


def standard_normal_stream(seed: int, stream_index: int, size: int) -> np.ndarray:
    """First ``size`` standard normals of the stream keyed by ``(seed, stream_index)``."""
    key = np.array([int(seed) & _MASK64, int(stream_index) & _MASK64], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.standard_normal(size)


def noise_vector(cfg: NoiseConfig, stream_index: int, size: int = 126) -> np.ndarray:
    """The additive term ``threshold * z``; exactly zero when noise is inactive."""
    if not cfg.active:
        return np.zeros(size)
    return cfg.threshold * standard_normal_stream(cfg.seed, stream_index, size)


def add_noise(v, cfg: NoiseConfig, stream_index: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if not cfg.active:
        return v.copy()
    return v + noise_vector(cfg, stream_index, v.shape[-1])
