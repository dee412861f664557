"""Evaluation metrics: kinetic and geometric features, Frechet distance,
diversity, beat alignment, foot skating and boundary discontinuity.

Frames are primitives ``(T, 139)``; joint positions come from forward
kinematics on a :class:`~dancerecal.motion.Skeleton` (y is up).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, InsufficientDataError, InvariantError
from .motion import JOINT_ROTATIONS, PrimitiveSequence, Skeleton, forward_kinematics

UP = 1
HORIZONTAL = [0, 2]

KINETIC_DIMS_PER_JOINT = 2


# --- features -----------------------------------------------------------------

def _frames(frames, minimum: int, what: str):
    f = np.asarray(frames, dtype=np.float64)
    if f.ndim != 2:
        raise ConfigurationError(f"{what} expects a (T, 139) clip, got shape {f.shape}")
    if f.shape[0] < minimum:
        raise InsufficientDataError(f"{what} needs at least {minimum} frames, got {f.shape[0]}")
    return f


def kinetic_features(frames, skeleton: Skeleton, fps: float = 30.0) -> np.ndarray:
    """Per-joint RMS speed then per-joint RMS acceleration (44 values)."""
    f = _frames(frames, 3, "kinetic_features")
    pos = forward_kinematics(f, skeleton)
    vel = np.diff(pos, axis=0) * fps
    acc = (pos[2:] - 2.0 * pos[1:-1] + pos[:-2]) * fps ** 2
    speed = np.sqrt(np.mean(np.sum(vel ** 2, axis=-1), axis=0))
    accel = np.sqrt(np.mean(np.sum(acc ** 2, axis=-1), axis=0))
    return np.concatenate([speed, accel])


@dataclass(frozen=True)
class Template:
    """Boolean pose predicate.

    ``above``: joint_a's height exceeds joint_b's by more than ``margin``.
    ``near``: joints closer than ``margin``.
    """

    name: str
    kind: str
    joint_a: object
    joint_b: object
    margin: float

    def __post_init__(self):
        if self.kind not in ("above", "near"):
            raise ConfigurationError(f"template {self.name!r}: kind must be 'above' or 'near'")
        if not np.isfinite(self.margin):
            raise ConfigurationError(f"template {self.name!r}: margin must be finite")

    def evaluate(self, positions, skeleton: Skeleton) -> np.ndarray:
        try:
            a = skeleton.index(self.joint_a)
            b = skeleton.index(self.joint_b)
        except ConfigurationError as exc:
            raise ConfigurationError(f"template {self.name!r}: {exc}") from None
        pa, pb = positions[..., a, :], positions[..., b, :]
        if self.kind == "above":
            return pa[..., UP] > pb[..., UP] + self.margin
        return np.linalg.norm(pa - pb, axis=-1) < self.margin

    def as_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "joint_a": self.joint_a,
                "joint_b": self.joint_b, "margin": float(self.margin)}


def templates_from_list(items) -> list:
    return [Template(d["name"], d["kind"], d["joint_a"], d["joint_b"], float(d["margin"]))
            for d in items]


def default_templates_text() -> str:
    return resources.files("dancerecal.data").joinpath("templates.json").read_text()


def default_templates() -> list:
    return templates_from_list(json.loads(default_templates_text())["templates"])


def check_templates(templates: Sequence[Template], skeleton: Skeleton) -> None:
    for t in templates:
        for j in (t.joint_a, t.joint_b):
            try:
                skeleton.index(j)
            except ConfigurationError:
                raise ConfigurationError(f"template {t.name!r} references unknown joint {j!r}") from None


def geometric_features(frames, skeleton: Skeleton, templates: Sequence[Template]) -> np.ndarray:
    """Fraction of frames on which each template predicate holds."""
    if not templates:
        raise ConfigurationError("geometric_features needs at least one template")
    check_templates(templates, skeleton)
    f = _frames(frames, 1, "geometric_features")
    pos = forward_kinematics(f, skeleton)
    return np.array([np.mean(t.evaluate(pos, skeleton)) for t in templates])


@dataclass(frozen=True)
class FeatureSet:
    rows: np.ndarray
    kind: str = "kinetic"

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise InvariantError(f"feature rows must be a non-empty (m, d) matrix, got {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise InvariantError("feature rows contain non-finite values")
        if self.kind not in ("kinetic", "geometric"):
            raise InvariantError(f"feature kind must be kinetic or geometric, got {self.kind!r}")
        object.__setattr__(self, "rows", rows)


def feature_set(seq: PrimitiveSequence, skeleton: Skeleton, kind: str = "kinetic",
                templates: Sequence[Template] | None = None) -> FeatureSet:
    """One feature row per batch row (clip) of ``seq``."""
    if kind == "kinetic":
        rows = [kinetic_features(clip, skeleton, seq.fps) for clip in seq.data]
    elif kind == "geometric":
        tpl = default_templates() if templates is None else templates
        rows = [geometric_features(clip, skeleton, tpl) for clip in seq.data]
    else:
        raise ConfigurationError(f"unknown feature kind {kind!r}")
    return FeatureSet(np.stack(rows), kind)


# --- distribution distances ---------------------------------------------------

@dataclass(frozen=True)
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.array(self.mean, dtype=np.float64))
        cov = np.atleast_2d(np.array(self.cov, dtype=np.float64))
        d = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (d, d):
            raise InvariantError(f"mean {mean.shape} and cov {cov.shape} are inconsistent")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-10):
            raise InvariantError("covariance is not symmetric")
        if d and np.linalg.eigvalsh(cov).min() < -1e-8:
            raise InvariantError("covariance has a negative eigenvalue below -1e-8")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def gaussian_stats(fs) -> GaussianStats:
    rows = fs.rows if isinstance(fs, FeatureSet) else np.asarray(fs, dtype=np.float64)
    if rows.shape[0] < 2:
        raise InsufficientDataError("need at least 2 rows to estimate a covariance")
    mean = rows.mean(axis=0)
    centered = rows - mean
    cov = centered.T @ centered / (rows.shape[0] - 1)
    return GaussianStats(mean, 0.5 * (cov + cov.T))


def _psd_eig(m):
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    # eigenvalues inside the roundoff band of the largest are treated as zero
    tol = max(w.max(initial=0.0), 0.0) * m.shape[0] * np.finfo(np.float64).eps
    return np.where(w > tol, w, 0.0), v


def sqrtm_psd(m) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition."""
    w, v = _psd_eig(np.asarray(m, dtype=np.float64))
    return (v * np.sqrt(w)) @ v.T


def fid(a: GaussianStats, b: GaussianStats) -> float:
    """Frechet distance between two Gaussians."""
    if a.dim != b.dim:
        raise ConfigurationError(f"dimension mismatch: {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    root_a = sqrtm_psd(a.cov)
    w, _ = _psd_eig(root_a @ b.cov @ root_a)
    d = diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.sum(np.sqrt(w))
    return float(max(d, 0.0))


def diversity(fs) -> float:
    """Mean Euclidean distance over all unordered row pairs."""
    rows = fs.rows if isinstance(fs, FeatureSet) else np.asarray(fs, dtype=np.float64)
    m = rows.shape[0]
    if m < 2:
        raise InsufficientDataError("diversity needs at least 2 rows")
    i, j = np.triu_indices(m, k=1)
    return float(np.mean(np.linalg.norm(rows[i] - rows[j], axis=-1)))


# --- beats --------------------------------------------------------------------

@dataclass(frozen=True)
class BeatTrack:
    times: np.ndarray
    fps: float = 30.0

    def __post_init__(self):
        t = np.array(self.times, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(t)):
            raise InvariantError("beat times must be finite")
        if np.any(t < 0):
            raise InvariantError("beat times must be nonnegative")
        if np.any(np.diff(t) <= 0):
            raise InvariantError("beat times must be strictly increasing")
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise InvariantError("beat fps must be positive")
        t.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "fps", float(self.fps))

    def __len__(self):
        return self.times.shape[0]


def speed_minima(speed, window: int = 2, rel_tol: float = 1e-9) -> np.ndarray:
    """Indices t where ``speed[t]`` is the strict minimum of ``speed[t-w : t+w+1]``.

    Only positions with a full window are considered. A minimum must undercut each
    neighbour by more than ``rel_tol * max|speed|`` so roundoff jitter on a
    constant series does not register as a beat.
    """
    v = np.asarray(speed, dtype=np.float64)
    w = int(window)
    if w < 1:
        raise ConfigurationError("window must be >= 1")
    n = v.shape[0]
    if n < 2 * w + 1:
        return np.zeros(0, dtype=np.int64)
    centre = v[w:n - w] + rel_tol * np.abs(v).max()
    keep = np.ones(centre.shape, dtype=bool)
    for s in range(1, w + 1):
        keep &= centre < v[w - s:n - w - s]
        keep &= centre < v[w + s:n - w + s]
    return np.flatnonzero(keep) + w


def mean_joint_speed(frames, skeleton: Skeleton, fps: float = 30.0) -> np.ndarray:
    """Mean over joints of ``|p(t+1) - p(t)| * fps``; length T - 1."""
    pos = forward_kinematics(np.asarray(frames, dtype=np.float64), skeleton)
    return np.linalg.norm(np.diff(pos, axis=0), axis=-1).mean(axis=-1) * fps


def kinematic_beats(frames, skeleton: Skeleton, fps: float = 30.0, window: int = 2) -> BeatTrack:
    f = _frames(frames, 2 * int(window) + 1, "kinematic_beats")
    v = mean_joint_speed(f, skeleton, fps)
    return BeatTrack(speed_minima(v, window).astype(np.float64), fps)


def beat_alignment_score(music: BeatTrack, kin: BeatTrack, sigma: float = 3.0) -> float:
    """Mean over music beats of ``exp(-d^2 / (2 sigma^2))``, d = distance to the
    nearest kinematic beat in music frames."""
    if not sigma > 0:
        raise ConfigurationError(f"sigma must be > 0, got {sigma}")
    if len(music) == 0:
        raise InsufficientDataError("music beat track is empty")
    if len(kin) == 0:
        return 0.0
    k = kin.times * (music.fps / kin.fps)
    d2 = np.min((k[None, :] - music.times[:, None]) ** 2, axis=1)
    return float(np.mean(np.exp(-d2 / (2.0 * sigma ** 2))))


# --- foot skating -------------------------------------------------------------

@dataclass(frozen=True)
class FsrThresholds:
    height_max: float = 0.05
    speed_min: float = 0.01

    def __post_init__(self):
        if not (self.height_max > 0 and self.speed_min > 0):
            raise ConfigurationError("FSR thresholds must be > 0")

    def as_dict(self) -> dict:
        return {"height_max": self.height_max, "speed_min": self.speed_min}


def foot_skating_ratio(frames, skeleton: Skeleton, th: FsrThresholds = FsrThresholds()) -> float:
    """Fraction of frame transitions where a near-ground foot slides horizontally."""
    if not skeleton.foot_joints:
        raise ConfigurationError("skeleton has no foot joints")
    f = _frames(frames, 2, "foot_skating_ratio")
    feet = forward_kinematics(f, skeleton)[:, list(skeleton.foot_joints), :]
    low = feet[1:, :, UP] < th.height_max
    disp = np.linalg.norm(np.diff(feet[:, :, HORIZONTAL], axis=0), axis=-1)
    skating = np.any(low & (disp > th.speed_min), axis=-1)
    return float(np.count_nonzero(skating) / (f.shape[0] - 1))


# --- transitions --------------------------------------------------------------

class BoundaryDiscontinuity(NamedTuple):
    per_junction: np.ndarray  # (B, n - 1)
    mean: float


def boundary_discontinuity(seq) -> BoundaryDiscontinuity:
    """L2 jump of the joint-rotation channels between adjacent primitives."""
    data = seq.data if isinstance(seq, PrimitiveSequence) else np.asarray(seq, dtype=np.float64)
    if data.ndim == 2:
        data = data[None]
    if data.shape[1] < 2:
        raise InsufficientDataError("boundary discontinuity needs at least 2 primitives")
    j = data[..., JOINT_ROTATIONS]
    d = np.linalg.norm(np.diff(j, axis=1), axis=-1)
    return BoundaryDiscontinuity(d, float(d.mean()))


# --- full suite ---------------------------------------------------------------

def evaluate(gen: PrimitiveSequence, ref: PrimitiveSequence, skeleton: Skeleton,
             music: BeatTrack, templates: Sequence[Template] | None = None,
             thresholds: FsrThresholds = FsrThresholds(), sigma: float = 3.0,
             window: int = 2) -> dict:
    """All metrics for generated clips against reference clips.

    Each batch row is one clip. FID and diversity need at least two clips;
    FSR and BAS are averaged over the generated clips.
    """
    tpl = default_templates() if templates is None else list(templates)
    if gen.batch < 2 or ref.batch < 2:
        raise InsufficientDataError(
            f"FID needs at least 2 clips per side, got gen={gen.batch}, ref={ref.batch}")
    gen_k = feature_set(gen, skeleton, "kinetic")
    ref_k = feature_set(ref, skeleton, "kinetic")
    gen_g = feature_set(gen, skeleton, "geometric", tpl)
    ref_g = feature_set(ref, skeleton, "geometric", tpl)
    fsr = [foot_skating_ratio(clip, skeleton, thresholds) for clip in gen.data]
    bas = [beat_alignment_score(music, kinematic_beats(clip, skeleton, gen.fps, window), sigma)
           for clip in gen.data]
    if gen.length >= 2:
        bd = boundary_discontinuity(gen)
        boundary = {"mean": bd.mean, "per_junction": bd.per_junction.tolist()}
    else:
        boundary = {"mean": None, "per_junction": []}
    return {
        "fid_k": fid(gaussian_stats(gen_k), gaussian_stats(ref_k)),
        "fid_g": fid(gaussian_stats(gen_g), gaussian_stats(ref_g)),
        "div_k": diversity(gen_k),
        "div_g": diversity(gen_g),
        "fsr": float(np.mean(fsr)),
        "bas": float(np.mean(bas)),
        "boundary_discontinuity": boundary,
        "per_clip": {"fsr": fsr, "bas": bas},
    }
