"""Skeletons, forward kinematics, yaw alignment and pose distances.

Coordinates are meters in a right-handed frame with +Y up and +Z pointing
toward the default camera. A pose is a plain ``(J, 3)`` float array; batches
are ``(N, J, 3)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InputError

FACING_EPS = 1e-6
MIRROR_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Skeleton:
    """Kinematic tree with rest offsets.

    ``parents[0]`` is -1 and every other parent index is smaller than its
    child, so iterating joints in order visits parents first. ``rest_offsets[0]``
    is the root position in the rest pose; the other rows are offsets from the
    parent joint.
    """

    joint_names: tuple
    parents: tuple
    rest_offsets: np.ndarray
    left_right_pairs: tuple = ()
    facing_joints: tuple | None = None
    name: str = "custom"
    mirror_index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        names = tuple(self.joint_names)
        parents = tuple(int(p) for p in self.parents)
        offsets = np.array(self.rest_offsets, dtype=np.float64)
        num = len(names)
        if num == 0:
            raise InputError("skeleton needs at least one joint")
        if len(set(names)) != num:
            raise InputError("joint names must be unique")
        if len(parents) != num or offsets.shape != (num, 3):
            raise InputError(
                f"expected {num} parents and ({num}, 3) offsets, got {len(parents)} and {offsets.shape}"
            )
        if parents[0] != -1:
            raise InputError("joint 0 must be the root (parent -1)")
        for i, p in enumerate(parents[1:], start=1):
            if not 0 <= p < i:
                raise InputError(f"joint {names[i]!r} has parent {p}; parents must precede children")
        if not np.all(np.isfinite(offsets)):
            raise InputError("rest offsets must be finite")

        pairs = tuple((int(a), int(b)) for a, b in self.left_right_pairs)
        mirror_index = np.arange(num)
        seen = set()
        for left, right in pairs:
            for j in (left, right):
                if not 0 <= j < num:
                    raise InputError(f"pair joint {j} out of range")
                if j in seen:
                    raise InputError(f"joint {names[j]!r} appears in more than one left/right pair")
                seen.add(j)
            if left == right:
                raise InputError(f"joint {names[left]!r} paired with itself")
            mirrored = offsets[right] * np.array([-1.0, 1.0, 1.0])
            if np.max(np.abs(offsets[left] - mirrored)) > MIRROR_TOL:
                raise InputError(
                    f"rest offsets of {names[left]!r} and {names[right]!r} are not mirror images"
                )
            mirror_index[left], mirror_index[right] = right, left

        facing = self.facing_joints
        if facing is not None:
            facing = tuple(names.index(j) if isinstance(j, str) else int(j) for j in facing)
            if len(facing) != 3 or len(set(facing)) != 3:
                raise InputError("facing_joints must name three distinct joints (left hip, right hip, spine)")

        offsets.setflags(write=False)
        mirror_index.setflags(write=False)
        object.__setattr__(self, "joint_names", names)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "rest_offsets", offsets)
        object.__setattr__(self, "left_right_pairs", pairs)
        object.__setattr__(self, "facing_joints", facing)
        object.__setattr__(self, "mirror_index", mirror_index)

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    def index(self, name: str) -> int:
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise InputError(f"unknown joint {name!r} for skeleton {self.name!r}") from None

    def rest_pose(self) -> np.ndarray:
        return forward_kinematics(np.zeros((self.num_joints, 3)), self)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "joint_names": list(self.joint_names),
            "parents": list(self.parents),
            "rest_offsets": self.rest_offsets.tolist(),
            "left_right_pairs": [list(p) for p in self.left_right_pairs],
            "facing_joints": None if self.facing_joints is None
            else [self.joint_names[j] for j in self.facing_joints],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Skeleton":
        try:
            names = data["joint_names"]
            pairs = [
                tuple(names.index(j) if isinstance(j, str) else j for j in pair)
                for pair in data.get("left_right_pairs", [])
            ]
            return cls(
                joint_names=names,
                parents=data["parents"],
                rest_offsets=data["rest_offsets"],
                left_right_pairs=pairs,
                facing_joints=data.get("facing_joints"),
                name=data.get("name", "custom"),
            )
        except (KeyError, ValueError, TypeError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"malformed skeleton definition: {exc}") from exc


def load_skeleton(path: str | Path | None = None) -> Skeleton:
    """Load a skeleton JSON file; with no path, the bundled 22-joint SMPL body template."""
    if path is None:
        text = resources.files("shotkit").joinpath("data/smpl22_skeleton.json").read_text()
    else:
        text = Path(path).read_text()
    return Skeleton.from_dict(json.loads(text))


def check_pose(pose, skeleton: Skeleton | None = None) -> np.ndarray:
    pose = np.asarray(pose, dtype=np.float64)
    if pose.ndim != 2 or pose.shape[1] != 3:
        raise InputError(f"pose must have shape (J, 3), got {pose.shape}")
    if skeleton is not None and pose.shape[0] != skeleton.num_joints:
        raise InputError(f"pose has {pose.shape[0]} joints, skeleton has {skeleton.num_joints}")
    if not np.all(np.isfinite(pose)):
        raise InputError("pose coordinates must be finite")
    return pose


def yaw_matrix(angle: float) -> np.ndarray:
    """Rotation about +Y by ``angle`` radians (maps +Z to (sin a, 0, cos a))."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotate_yaw(pose, angle: float) -> np.ndarray:
    """Rotate joints about the vertical axis through the origin."""
    return np.asarray(pose, dtype=np.float64) @ yaw_matrix(angle).T


def forward_kinematics(rotations, skeleton: Skeleton) -> np.ndarray:
    """Joint positions from per-joint axis-angle rotations.

    ``rotations`` is ``(J, 3)`` or ``(..., J, 3)``; row 0 is the global root
    orientation. The root sits at its rest offset and each child is placed at
    ``parent + R_parent_global @ offset``.
    """
    rot = np.asarray(rotations, dtype=np.float64)
    num = skeleton.num_joints
    if rot.shape[-2:] != (num, 3):
        raise InputError(f"rotations must have shape (..., {num}, 3), got {rot.shape}")
    if not np.all(np.isfinite(rot)):
        raise InputError("rotations must be finite")
    if np.any(np.linalg.norm(rot, axis=-1) >= 2 * np.pi):
        raise InputError("axis-angle magnitudes must be below 2*pi")

    batch = rot.shape[:-2]
    local = Rotation.from_rotvec(rot.reshape(-1, 3)).as_matrix().reshape(batch + (num, 3, 3))
    glob = np.empty_like(local)
    pos = np.empty(batch + (num, 3))
    offsets = skeleton.rest_offsets
    glob[..., 0, :, :] = local[..., 0, :, :]
    pos[..., 0, :] = offsets[0]
    for j in range(1, num):
        p = skeleton.parents[j]
        pos[..., j, :] = pos[..., p, :] + np.einsum("...ab,b->...a", glob[..., p, :, :], offsets[j])
        glob[..., j, :, :] = glob[..., p, :, :] @ local[..., j, :, :]
    return pos


def facing_from_joints(pose, lhip: int, rhip: int, spine: int):
    """Horizontal unit normal of the hip-to-hip / hips-to-spine plane, or None.

    None means the facing is degenerate: coincident hips, or a normal that is
    vertical within the tolerance.
    """
    pose = np.asarray(pose, dtype=np.float64)
    across = pose[lhip] - pose[rhip]
    if np.linalg.norm(across) < FACING_EPS:
        return None
    up = pose[spine] - 0.5 * (pose[lhip] + pose[rhip])
    normal = np.cross(across, up)
    norm = np.linalg.norm(normal)
    hnorm = np.hypot(normal[0], normal[2])
    if norm < 1e-12 or hnorm < FACING_EPS * norm:
        return None
    return np.array([normal[0] / hnorm, 0.0, normal[2] / hnorm])


def facing_direction(pose, skeleton: Skeleton):
    """Horizontal unit facing vector, or None when the facing is degenerate."""
    if skeleton.facing_joints is None:
        return None
    return facing_from_joints(pose, *skeleton.facing_joints)


def yaw_of(direction) -> float:
    """Yaw of a horizontal direction relative to +Z, wrapped into [-pi, pi)."""
    yaw = float(np.arctan2(direction[0], direction[2]))
    return -np.pi if yaw >= np.pi else yaw


def body_yaw(pose, skeleton: Skeleton):
    """Signed yaw of the facing vector relative to +Z, in [-pi, pi); None if degenerate."""
    f = facing_direction(pose, skeleton)
    return None if f is None else yaw_of(f)


def yaw_align_flagged(pose, skeleton: Skeleton) -> tuple[np.ndarray, bool]:
    """Like :func:`yaw_align` but also reports whether the facing was degenerate."""
    pose = check_pose(pose, skeleton)
    centered = pose - pose[0]
    yaw = body_yaw(centered, skeleton)
    if yaw is None:
        return centered, True
    return rotate_yaw(centered, -yaw), False


def yaw_align(pose, skeleton: Skeleton) -> np.ndarray:
    """Move the root to the origin and turn the body to face +Z.

    Only the rotation about the vertical axis is removed, so heights and
    tilts are preserved. Degenerate facings get the translation only.
    """
    return yaw_align_flagged(pose, skeleton)[0]


def yaw_align_batch(poses, skeleton: Skeleton) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`yaw_align_flagged` over ``(N, J, 3)``; returns (aligned, degenerate)."""
    poses = np.asarray(poses, dtype=np.float64)
    if poses.ndim != 3 or poses.shape[1:] != (skeleton.num_joints, 3):
        raise InputError(f"poses must have shape (N, {skeleton.num_joints}, 3), got {poses.shape}")
    centered = poses - poses[:, :1, :]
    num = poses.shape[0]
    if skeleton.facing_joints is None:
        return centered, np.ones(num, dtype=bool)
    lhip, rhip, spine = skeleton.facing_joints
    across = centered[:, lhip] - centered[:, rhip]
    up = centered[:, spine] - 0.5 * (centered[:, lhip] + centered[:, rhip])
    normal = np.cross(across, up)
    norm = np.linalg.norm(normal, axis=1)
    hnorm = np.hypot(normal[:, 0], normal[:, 2])
    degenerate = (np.linalg.norm(across, axis=1) < FACING_EPS) | (norm < 1e-12) | (hnorm < FACING_EPS * norm)
    yaw = np.where(degenerate, 0.0, np.arctan2(normal[:, 0], normal[:, 2]))
    c, s = np.cos(-yaw)[:, None], np.sin(-yaw)[:, None]
    x, z = centered[..., 0], centered[..., 2]
    out = centered.copy()
    out[..., 0] = c * x + s * z
    out[..., 2] = -s * x + c * z
    return out, degenerate


def mpjpe(a, b) -> float:
    """Mean per-joint Euclidean distance between two poses."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 3:
        raise InputError(f"mpjpe needs two (J, 3) poses of equal size, got {a.shape} and {b.shape}")
    return float(np.linalg.norm(a - b, axis=1).mean())


def aligned_mpjpe(a, b, skeleton: Skeleton) -> float:
    return mpjpe(yaw_align(a, skeleton), yaw_align(b, skeleton))


def mirror(pose, skeleton: Skeleton) -> np.ndarray:
    """Reflect across the sagittal plane: negate X, then swap left/right joints."""
    pose = check_pose(pose, skeleton)
    flipped = pose * np.array([-1.0, 1.0, 1.0])
    return flipped[skeleton.mirror_index]
