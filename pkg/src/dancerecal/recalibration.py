"""Recurrent recalibration of a primitive sequence.

Each step stacks the current primitive's 126 joint-rotation channels with the
previous recalibrated output (plus injected noise) and pools the pair back to
126 channels. Foot, root translation and root rotation channels pass through
untouched. The pass is strictly left to right.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DanceRecalError, NonFiniteError
from .motion import JOINT_ROTATIONS, PrimitiveSequence, _check_length
from .noise import NoiseConfig, add_noise
from .pooling import PoolingParams, ema_params, init_params, passthrough_params, pooling_block

PRESETS = ("learned", "passthrough", "ema")


@dataclass(frozen=True)
class RecalConfig:
    params: PoolingParams
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    preset: str = "learned"
    alpha: float | None = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigurationError(f"preset must be one of {PRESETS}, got {self.preset!r}")
        if self.preset != "learned" and not self.params.is_linear:
            raise ConfigurationError(
                f"{self.preset} preset requires normalize=false, identity activations, no batchnorm")

    @classmethod
    def passthrough(cls, noise: NoiseConfig | None = None) -> "RecalConfig":
        return cls(passthrough_params(), noise or NoiseConfig(), "passthrough")

    @classmethod
    def ema(cls, alpha: float, noise: NoiseConfig | None = None) -> "RecalConfig":
        return cls(ema_params(alpha), noise or NoiseConfig(), "ema", float(alpha))

    @classmethod
    def learned(cls, params: PoolingParams | None = None, noise: NoiseConfig | None = None,
                seed: int = 0) -> "RecalConfig":
        return cls(params if params is not None else init_params(seed), noise or NoiseConfig())

    def describe(self) -> str:
        return f"ema:{self.alpha!r}" if self.preset == "ema" else self.preset


def parse_preset(text: str) -> RecalConfig:
    """``"passthrough"`` or ``"ema:ALPHA"`` -> config with noise disabled."""
    if text == "passthrough":
        return RecalConfig.passthrough()
    name, _, arg = text.partition(":")
    if name == "ema" and arg:
        try:
            alpha = float(arg)
        except ValueError:
            raise ConfigurationError(f"bad ema alpha {arg!r}") from None
        return RecalConfig.ema(alpha)
    raise ConfigurationError(f"unknown preset {text!r}; use passthrough or ema:ALPHA")


def _pool_joints(current, previous, cfg: RecalConfig, step_index: int):
    prev = add_noise(previous, cfg.noise, step_index)
    return pooling_block(np.stack([current, prev], axis=-2), cfg.params)


def recalibrate_step(gd_i, grd_prev, cfg: RecalConfig, step_index: int) -> np.ndarray:
    """One recurrent update; returns the recalibrated primitive."""
    gd_i = np.asarray(gd_i, dtype=np.float64)
    grd_prev = np.asarray(grd_prev, dtype=np.float64)
    _check_length(gd_i)
    _check_length(grd_prev)
    out = gd_i.copy()
    out[..., JOINT_ROTATIONS] = _pool_joints(gd_i[..., JOINT_ROTATIONS],
                                             grd_prev[..., JOINT_ROTATIONS], cfg, step_index)
    return out


def recalibrate_first(gd_0, cfg: RecalConfig) -> np.ndarray:
    """Seed of the recursion: the pooling block applied to ``(gd_0, gd_0)``, no noise."""
    gd_0 = np.asarray(gd_0, dtype=np.float64)
    _check_length(gd_0)
    out = gd_0.copy()
    j = gd_0[..., JOINT_ROTATIONS]
    out[..., JOINT_ROTATIONS] = pooling_block(np.stack([j, j], axis=-2), cfg.params)
    return out


def _recalibrate_row(row, cfg: RecalConfig, b: int):
    out = np.empty_like(row)
    for i in range(row.shape[0]):
        try:
            if i == 0:
                out[0] = recalibrate_first(row[0], cfg)
            else:
                out[i] = recalibrate_step(row[i], out[i - 1], cfg, i)
        except DanceRecalError as exc:
            raise type(exc)(f"at (batch {b}, index {i}): {exc}") from exc
    return out


def recalibrate_sequence(seq: PrimitiveSequence, cfg: RecalConfig) -> PrimitiveSequence:
    """Run the recursion over every batch row independently."""
    if not np.all(np.isfinite(seq.data)):
        raise NonFiniteError("sequence contains non-finite values")
    data = np.stack([_recalibrate_row(row, cfg, b) for b, row in enumerate(seq.data)])
    return seq.replace(data)
