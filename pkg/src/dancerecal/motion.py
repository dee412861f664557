"""Coarse motion representation: channel layout, 6D rotations, skeletons,
forward kinematics and mirroring.

A primitive is a float64 vector of 139 channels::

    [0, 4)     foot channels (opaque, carried through)
    [4, 7)     root translation, meters
    [7, 13)    root rotation, 6D
    [13, 139)  21 joint rotations, 6D each; block k drives skeleton joint k + 1

Every function here accepts arrays with arbitrary leading batch dimensions.
World frame is y-up; the character's left side is +x.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateRotationError,
    InvalidMatrixError,
    LayoutError,
)

FOOT_DIMS = 4
ROOT_TRANSLATION_DIMS = 3
ROOT_ROTATION_DIMS = 6
JOINT_ROTATION_DIMS = 126
TOTAL_DIMS = 139
NUM_NONROOT_JOINTS = JOINT_ROTATION_DIMS // 6
NUM_JOINTS = NUM_NONROOT_JOINTS + 1

FOOT = slice(0, 4)
ROOT_TRANSLATION = slice(4, 7)
ROOT_ROTATION = slice(7, 13)
JOINT_ROTATIONS = slice(13, 139)

# index of the first joint-rotation channel
JOINT_OFFSET = 13

DEGENERATE_TOL = 1e-8
ORTHO_TOL = 1e-6

SEQUENCE_KINDS = ("coarse", "fine", "mixed")


@dataclass(frozen=True)
class ChannelLayout:
    foot_dims: int = FOOT_DIMS
    root_translation_dims: int = ROOT_TRANSLATION_DIMS
    root_rotation_dims: int = ROOT_ROTATION_DIMS
    joint_rotation_dims: int = JOINT_ROTATION_DIMS

    @property
    def total(self) -> int:
        return (self.foot_dims + self.root_translation_dims
                + self.root_rotation_dims + self.joint_rotation_dims)

    @property
    def joint_count_nonroot(self) -> int:
        return self.joint_rotation_dims // 6

    def as_dict(self) -> dict:
        return {
            "foot": self.foot_dims,
            "root_translation": self.root_translation_dims,
            "root_rotation": self.root_rotation_dims,
            "joint_rotations": self.joint_rotation_dims,
            "total": self.total,
        }


LAYOUT = ChannelLayout()


def _check_length(p: np.ndarray) -> None:
    if p.shape[-1] != TOTAL_DIMS:
        raise LayoutError(
            f"primitive has {p.shape[-1]} channels, expected {TOTAL_DIMS}")


def split_channels(p):
    """Split primitive(s) into ``(foot, root_translation, root_rotation,
    joint_rotations)``."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 0:
        raise LayoutError("primitive must be a vector")
    _check_length(p)
    return (p[..., FOOT].copy(), p[..., ROOT_TRANSLATION].copy(),
            p[..., ROOT_ROTATION].copy(), p[..., JOINT_ROTATIONS].copy())


def join_channels(foot, root_translation, root_rotation, joint_rotations):
    parts = [np.asarray(x, dtype=np.float64)
             for x in (foot, root_translation, root_rotation, joint_rotations)]
    expected = (FOOT_DIMS, ROOT_TRANSLATION_DIMS, ROOT_ROTATION_DIMS,
                JOINT_ROTATION_DIMS)
    for part, n in zip(parts, expected):
        if part.shape[-1] != n:
            raise LayoutError(f"channel group has {part.shape[-1]} entries, expected {n}")
    lead = np.broadcast_shapes(*[x.shape[:-1] for x in parts])
    return np.concatenate([np.broadcast_to(x, lead + x.shape[-1:]) for x in parts], axis=-1)


def joint_rotation_blocks(p):
    """View the 126 joint channels as ``(..., 21, 6)``."""
    p = np.asarray(p, dtype=np.float64)
    _check_length(p)
    return p[..., JOINT_ROTATIONS].reshape(p.shape[:-1] + (NUM_NONROOT_JOINTS, 6))


def local_rotation_blocks(p):
    """Root block followed by the 21 joint blocks, ``(..., 22, 6)``."""
    p = np.asarray(p, dtype=np.float64)
    _check_length(p)
    return p[..., ROOT_ROTATION.start:].reshape(p.shape[:-1] + (NUM_JOINTS, 6))


def _degenerate_mask(r):
    a, b = r[..., :3], r[..., 3:]
    na = np.linalg.norm(a, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        c1 = a / na[..., None]
        cross = np.linalg.norm(np.cross(c1, b), axis=-1)
    bad = ~(na > DEGENERATE_TOL) | ~(cross > DEGENERATE_TOL)
    return bad


def rot6d_to_matrix(r):
    """Gram-Schmidt reconstruction of a rotation matrix from 6D vector(s).

    The two 3-vectors become the first two columns after orthonormalization;
    the third column is their cross product.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape[-1] != 6:
        raise LayoutError(f"6D rotation needs 6 entries, got {r.shape[-1]}")
    if np.any(_degenerate_mask(r)):
        raise DegenerateRotationError(
            "6D rotation has a near-zero first vector or parallel vectors")
    a, b = r[..., :3], r[..., 3:]
    c1 = a / np.linalg.norm(a, axis=-1, keepdims=True)
    c2 = b - np.sum(c1 * b, axis=-1, keepdims=True) * c1
    c2 = c2 / np.linalg.norm(c2, axis=-1, keepdims=True)
    c3 = np.cross(c1, c2)
    return np.stack([c1, c2, c3], axis=-1)


def matrix_to_rot6d(m):
    """First two columns of rotation matrix(es), concatenated."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape[-2:] != (3, 3):
        raise InvalidMatrixError(f"expected 3x3 matrices, got shape {m.shape}")
    resid = np.abs(np.swapaxes(m, -1, -2) @ m - np.eye(3)).max(axis=(-2, -1))
    if not np.all(resid <= ORTHO_TOL) or not np.all(np.linalg.det(m) > 0):
        raise InvalidMatrixError("matrix is not a proper rotation")
    return np.concatenate([m[..., :, 0], m[..., :, 1]], axis=-1)


def axis_angle_to_matrix(v):
    """Rodrigues formula for rotation vector(s) ``(..., 3)``."""
    v = np.asarray(v, dtype=np.float64)
    theta = np.linalg.norm(v, axis=-1)[..., None, None]
    k = np.zeros(v.shape[:-1] + (3, 3))
    k[..., 0, 1], k[..., 0, 2] = -v[..., 2], v[..., 1]
    k[..., 1, 0], k[..., 1, 2] = v[..., 2], -v[..., 0]
    k[..., 2, 0], k[..., 2, 1] = -v[..., 1], v[..., 0]
    small = theta < 1e-12
    safe = np.where(small, 1.0, theta)
    s = np.where(small, 1.0, np.sin(safe) / safe)
    c = np.where(small, 0.5, (1.0 - np.cos(safe)) / safe ** 2)
    return np.eye(3) + s * k + c * (k @ k)


IDENTITY_6D = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


def identity_primitive(root_translation=(0.0, 0.0, 0.0)):
    p = np.zeros(TOTAL_DIMS)
    p[ROOT_TRANSLATION] = root_translation
    p[ROOT_ROTATION.start:] = np.tile(IDENTITY_6D, NUM_JOINTS)
    return p


@dataclass(frozen=True, eq=False)
class PrimitiveSequence:
    """A ``(B, n, 139)`` block of primitives.

    A 2-D array is promoted to a single batch row.
    """

    data: np.ndarray
    fps: float = 30.0
    kind: str = "coarse"

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3:
            raise LayoutError(f"sequence data must be (B, n, 139), got shape {data.shape}")
        _check_length(data)
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise LayoutError(f"sequence needs B >= 1 and n >= 1, got {data.shape[:2]}")
        if self.kind not in SEQUENCE_KINDS:
            raise ConfigurationError(f"kind must be one of {SEQUENCE_KINDS}, got {self.kind!r}")
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise ConfigurationError(f"fps must be positive, got {self.fps}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "fps", float(self.fps))

    @property
    def batch(self) -> int:
        return self.data.shape[0]

    @property
    def length(self) -> int:
        return self.data.shape[1]

    def replace(self, data) -> "PrimitiveSequence":
        return PrimitiveSequence(data, fps=self.fps, kind=self.kind)

    def __eq__(self, other):
        if not isinstance(other, PrimitiveSequence):
            return NotImplemented
        return (self.fps == other.fps and self.kind == other.kind
                and np.array_equal(self.data, other.data))


@dataclass(frozen=True, eq=False)
class Skeleton:
    joint_names: tuple
    parents: tuple
    offsets: np.ndarray
    mirror_pairs: tuple = ()
    foot_joints: tuple = ()
    _pair_of: tuple = field(init=False, repr=False, default=())

    def __post_init__(self):
        names = tuple(str(n) for n in self.joint_names)
        parents = tuple(int(p) for p in self.parents)
        offsets = np.array(self.offsets, dtype=np.float64)
        pairs = tuple((int(a), int(b)) for a, b in self.mirror_pairs)
        feet = tuple(int(j) for j in self.foot_joints)
        n = len(names)
        if n != NUM_JOINTS:
            raise ConfigurationError(f"skeleton needs {NUM_JOINTS} joints, got {n}")
        if len(set(names)) != n:
            raise ConfigurationError("joint names must be unique")
        if len(parents) != n or offsets.shape != (n, 3):
            raise ConfigurationError("parents and offsets must have one entry per joint")
        if parents[0] != -1:
            raise ConfigurationError("parents[0] must be -1 (root)")
        for i, p in enumerate(parents[1:], start=1):
            if not 0 <= p < i:
                raise ConfigurationError(
                    f"joint {i} has parent {p}; parents must precede children")
        if not np.all(np.isfinite(offsets)):
            raise ConfigurationError("offsets must be finite")
        pair_of = list(range(n))
        seen = set()
        for a, b in pairs:
            for j in (a, b):
                if not 0 <= j < n:
                    raise ConfigurationError(f"mirror pair joint {j} out of range")
                if j in seen:
                    raise ConfigurationError(f"joint {j} appears in more than one mirror pair")
                seen.add(j)
            if a == b:
                raise ConfigurationError(f"joint {a} paired with itself")
            pair_of[a], pair_of[b] = b, a
        for j in feet:
            if not 0 <= j < n:
                raise ConfigurationError(f"foot joint {j} out of range")
        offsets.flags.writeable = False
        object.__setattr__(self, "joint_names", names)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "mirror_pairs", pairs)
        object.__setattr__(self, "foot_joints", feet)
        object.__setattr__(self, "_pair_of", tuple(pair_of))

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    def index(self, joint) -> int:
        """Resolve a joint name or index."""
        if isinstance(joint, (int, np.integer)) and not isinstance(joint, bool):
            if 0 <= joint < self.num_joints:
                return int(joint)
        elif joint in self.joint_names:
            return self.joint_names.index(joint)
        raise ConfigurationError(f"unknown joint {joint!r}")

    def mirror_of(self, j: int) -> int:
        return self._pair_of[j]

    def as_dict(self) -> dict:
        return {
            "joint_names": list(self.joint_names),
            "parents": list(self.parents),
            "offsets": self.offsets.tolist(),
            "mirror_pairs": [list(p) for p in self.mirror_pairs],
            "foot_joints": list(self.foot_joints),
        }

    def __eq__(self, other):
        if not isinstance(other, Skeleton):
            return NotImplemented
        return self.as_dict() == other.as_dict()


def default_skeleton() -> Skeleton:
    """22-joint SMPL-style humanoid shipped with the package."""
    text = resources.files("dancerecal.data").joinpath("skeleton.json").read_text()
    d = json.loads(text)
    return Skeleton(d["joint_names"], d["parents"], d["offsets"],
                    d["mirror_pairs"], d["foot_joints"])


def forward_kinematics(p, skeleton: Skeleton):
    """World joint positions ``(..., 22, 3)`` for primitive(s) ``(..., 139)``."""
    p = np.asarray(p, dtype=np.float64)
    _check_length(p)
    blocks = local_rotation_blocks(p)
    bad = _degenerate_mask(blocks)
    if np.any(bad):
        j = int(np.argwhere(bad)[0][-1])
        raise DegenerateRotationError(
            f"degenerate 6D rotation for joint {j} ({skeleton.joint_names[j]})")
    local = rot6d_to_matrix(blocks)
    n = skeleton.num_joints
    glob = np.empty_like(local)
    # root-relative first; the translation is added once at the end so a
    # translated pose differs from the untranslated one by exactly t
    rel = np.zeros(p.shape[:-1] + (n, 3))
    glob[..., 0, :, :] = local[..., 0, :, :]
    offsets = skeleton.offsets
    for j in range(1, n):
        par = skeleton.parents[j]
        glob[..., j, :, :] = glob[..., par, :, :] @ local[..., j, :, :]
        rel[..., j, :] = rel[..., par, :] + glob[..., par, :, :] @ offsets[j]
    return rel + p[..., None, ROOT_TRANSLATION]


# x-reflection F = diag(-1, 1, 1) acting as F M F on a 6D block: Gram-Schmidt
# commutes with orthogonal maps, so the sign flips below decode to exactly F M F.
_MIRROR_6D_SIGNS = np.array([1.0, -1.0, -1.0, -1.0, 1.0, 1.0])


def _foot_channel_permutation(skeleton: Skeleton):
    feet = skeleton.foot_joints
    if len(feet) != FOOT_DIMS:
        raise ConfigurationError(
            f"mirroring maps foot channel k to foot_joints[k]; need {FOOT_DIMS} foot joints")
    perm = []
    for j in feet:
        m = skeleton.mirror_of(j)
        if m not in feet:
            raise ConfigurationError(f"mirror of foot joint {j} is not a foot joint")
        perm.append(feet.index(m))
    return perm


def mirror(p, skeleton: Skeleton):
    """Reflect primitive(s) through the x = 0 plane, swapping left and right."""
    p = np.asarray(p, dtype=np.float64)
    _check_length(p)
    for j in range(skeleton.num_joints):
        if skeleton.mirror_of(j) == j and abs(skeleton.offsets[j, 0]) > 1e-9:
            raise ConfigurationError(
                f"joint {j} ({skeleton.joint_names[j]}) is off the midline but has no mirror pair")
    perm = _foot_channel_permutation(skeleton)
    out = p.copy()
    out[..., FOOT] = p[..., FOOT][..., perm]
    out[..., 4] = -p[..., 4]
    blocks = local_rotation_blocks(p) * _MIRROR_6D_SIGNS
    src = [skeleton.mirror_of(j) for j in range(skeleton.num_joints)]
    out[..., ROOT_ROTATION.start:] = blocks[..., src, :].reshape(p.shape[:-1] + (-1,))
    return out


def mirror_sequence(seq: PrimitiveSequence, skeleton: Skeleton) -> PrimitiveSequence:
    return seq.replace(mirror(seq.data, skeleton))


class Violation(NamedTuple):
    batch: int
    index: int
    channel: int | None
    kind: str
    message: str


def validate(seq) -> list:
    """List every invariant violation in a sequence; empty iff valid.

    Accepts a :class:`PrimitiveSequence` or a raw nested ``B x n x channels``
    structure, possibly ragged.
    """
    rows = seq.data if isinstance(seq, PrimitiveSequence) else seq
    out = []
    for b, row in enumerate(rows):
        for i, prim in enumerate(row):
            try:
                v = np.asarray(prim, dtype=np.float64)
            except (TypeError, ValueError):
                out.append(Violation(b, i, None, "type", "primitive is not numeric"))
                continue
            if v.ndim != 1 or v.shape[0] != TOTAL_DIMS:
                out.append(Violation(b, i, None, "length",
                                     f"primitive has shape {v.shape}, expected ({TOTAL_DIMS},)"))
                continue
            bad = np.flatnonzero(~np.isfinite(v))
            for c in bad:
                out.append(Violation(b, i, int(c), "non-finite", f"value {v[c]!r}"))
            blocks = local_rotation_blocks(v)
            for k in np.flatnonzero(_degenerate_mask(blocks)):
                c = ROOT_ROTATION.start + 6 * int(k)
                if np.all(np.isfinite(v[c:c + 6])):
                    out.append(Violation(b, i, c, "degenerate-rotation",
                                         f"6D block for joint {int(k)} is degenerate"))
    return out


def random_rotations_6d(rng: np.random.Generator, shape: Sequence[int], scale: float = 1.0):
    """6D encodings of rotations with axis-angle vectors ~ N(0, scale^2 I)."""
    aa = rng.normal(scale=scale, size=tuple(shape) + (3,))
    return matrix_to_rot6d(axis_angle_to_matrix(aa))


def random_primitives(rng: np.random.Generator, shape: Sequence[int], scale: float = 1.0):
    """Valid random primitives: Gaussian foot and root channels, random rotations."""
    shape = tuple(shape)
    p = np.empty(shape + (TOTAL_DIMS,))
    p[..., :7] = rng.normal(size=shape + (7,))
    p[..., ROOT_ROTATION.start:] = random_rotations_6d(
        rng, shape + (NUM_JOINTS,), scale).reshape(shape + (-1,))
    return p
