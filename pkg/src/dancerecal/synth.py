"""Deterministic synthetic primitive sequences.

Rotation channels always hold proper rotations (axis-angle -> matrix -> 6D),
never raw Gaussians.

``iid-gaussian``
    every primitive independent: axis-angle ~ N(0, 0.5^2 I) per joint,
    root at standing height plus N(0, 0.05^2) jitter.
``random-walk``
    axis-angle and root position accumulate N(0, 0.1^2) / N(0, 0.02^2) steps.
``sinusoid``
    joint k (block k) rotates about z by
    ``AMPLITUDE * sin(2 pi i / PERIOD + 2 pi k / 21 + ROW_PHASE * b)``;
    root identity, sliding ``ROOT_SWAY * sin(2 pi i / PERIOD)`` along x.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .motion import (
    JOINT_OFFSET,
    NUM_JOINTS,
    NUM_NONROOT_JOINTS,
    ROOT_ROTATION,
    ROOT_TRANSLATION,
    TOTAL_DIMS,
    PrimitiveSequence,
    axis_angle_to_matrix,
    identity_primitive,
    matrix_to_rot6d,
)

KINDS = ("iid-gaussian", "random-walk", "sinusoid")

STANDING_HEIGHT = 0.93
AMPLITUDE = 0.5
PERIOD = 20.0
ROW_PHASE = 0.5
ROOT_SWAY = 0.1

_STREAM_TAG = 0x5EED


def _generator(seed: int) -> np.random.Generator:
    key = np.array([int(seed) & (2**64 - 1), _STREAM_TAG], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sinusoid_angle(b: int, i, k):
    return AMPLITUDE * np.sin(2 * np.pi * np.asarray(i) / PERIOD
                              + 2 * np.pi * np.asarray(k) / NUM_NONROOT_JOINTS + ROW_PHASE * b)


def sinusoid_block(theta):
    """6D encoding of a rotation by ``theta`` about z."""
    c, s = np.cos(theta), np.sin(theta)
    z = np.zeros_like(c)
    return np.stack([c, s, z, -s, c, z], axis=-1) + 0.0


def _rotations(aa):
    return matrix_to_rot6d(axis_angle_to_matrix(aa)).reshape(aa.shape[:-2] + (-1,))


def synthesize(kind: str, n: int = 13, batch: int = 1, seed: int = 0,
               fps: float = 30.0) -> PrimitiveSequence:
    if kind not in KINDS:
        raise ConfigurationError(f"unknown synth kind {kind!r}; choose from {KINDS}")
    if n < 1 or batch < 1:
        raise ConfigurationError("n and batch must be >= 1")
    data = np.zeros((batch, n, TOTAL_DIMS))
    rot = slice(ROOT_ROTATION.start, TOTAL_DIMS)
    if kind == "iid-gaussian":
        gen = _generator(seed)
        data[..., rot] = _rotations(gen.normal(scale=0.5, size=(batch, n, NUM_JOINTS, 3)))
        data[..., ROOT_TRANSLATION] = gen.normal(scale=0.05, size=(batch, n, 3))
        data[..., 5] += STANDING_HEIGHT
    elif kind == "random-walk":
        gen = _generator(seed)
        aa = np.cumsum(gen.normal(scale=0.1, size=(batch, n, NUM_JOINTS, 3)), axis=1)
        data[..., rot] = _rotations(aa)
        walk = np.cumsum(gen.normal(scale=0.02, size=(batch, n, 3)), axis=1)
        walk[..., 1] = 0.0
        data[..., ROOT_TRANSLATION] = walk
        data[..., 5] += STANDING_HEIGHT
    else:
        i = np.arange(n)[:, None]
        k = np.arange(NUM_NONROOT_JOINTS)[None, :]
        for b in range(batch):
            data[b] = identity_primitive((0.0, STANDING_HEIGHT, 0.0))
            data[b, :, 4] = ROOT_SWAY * np.sin(2 * np.pi * np.arange(n) / PERIOD) + 0.0
            blocks = sinusoid_block(sinusoid_angle(b, i, k))
            data[b, :, JOINT_OFFSET:] = blocks.reshape(n, -1)
    # canonical zero: keep -0.0 out of serialized files
    return PrimitiveSequence(data + 0.0, fps=fps, kind="coarse")


def describe(kind: str) -> dict:
    """Parameters echoed into run manifests."""
    if kind == "sinusoid":
        return {"amplitude": AMPLITUDE, "period_frames": PERIOD, "row_phase": ROW_PHASE,
                "root_sway": ROOT_SWAY, "standing_height": STANDING_HEIGHT}
    if kind == "iid-gaussian":
        return {"rotation_scale": 0.5, "root_jitter": 0.05, "standing_height": STANDING_HEIGHT}
    return {"rotation_step": 0.1, "root_step": 0.02, "standing_height": STANDING_HEIGHT}
