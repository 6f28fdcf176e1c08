"""Furthest-point sampling of pose collections under yaw-aligned MPJPE.

Each pick maximizes the minimum distance to the frames already chosen. The
minimum-distance array is updated incrementally (one pass over the collection
per pick), so no pairwise matrix is ever built.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InputError
from .kinematics import Skeleton, yaw_align_batch


@dataclass(eq=False)
class PoseCollection:
    """Frames to sample from: unique, mutually comparable ids and their poses."""

    ids: list
    poses: np.ndarray
    skeleton: Skeleton

    def __post_init__(self):
        self.ids = list(self.ids)
        self.poses = np.asarray(self.poses, dtype=np.float64)
        num_joints = self.skeleton.num_joints
        if self.poses.ndim != 3 or self.poses.shape[1:] != (num_joints, 3):
            raise InputError(f"poses must have shape (N, {num_joints}, 3), got {self.poses.shape}")
        if len(self.ids) != self.poses.shape[0]:
            raise InputError(f"{len(self.ids)} ids for {self.poses.shape[0]} poses")
        if len(set(self.ids)) != len(self.ids):
            raise InputError("frame ids must be unique")
        if not np.all(np.isfinite(self.poses)):
            raise InputError("pose coordinates must be finite")
        order = sorted(range(len(self.ids)), key=self.ids.__getitem__)
        self._rank = np.empty(len(order), dtype=np.int64)
        self._rank[order] = np.arange(len(order))
        self._position = {fid: i for i, fid in enumerate(self.ids)}
        self._aligned = None

    def __len__(self):
        return len(self.ids)

    def position(self, frame_id) -> int:
        try:
            return self._position[frame_id]
        except KeyError:
            raise InputError(f"unknown frame id {frame_id!r}") from None

    @property
    def rank(self) -> np.ndarray:
        return self._rank

    def aligned(self) -> np.ndarray:
        """Yaw-aligned poses (root at origin, facing +Z), computed once."""
        if self._aligned is None:
            self._aligned, _ = yaw_align_batch(self.poses, self.skeleton)
        return self._aligned


@dataclass(frozen=True)
class SubsetSpec:
    fraction: float
    subset_count: int = 1
    starts: tuple | None = None  # explicit start ids; None draws seeded-random starts

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise InputError(f"fraction must be in (0, 1], got {self.fraction}")
        if self.subset_count < 1:
            raise InputError("subset_count must be at least 1")
        if self.starts is not None:
            if len(self.starts) != self.subset_count:
                raise InputError(f"{len(self.starts)} explicit starts for {self.subset_count} subsets")
            if len(set(self.starts)) != len(self.starts):
                raise InputError("explicit start frames must be distinct")

    def subset_size(self, population: int) -> int:
        return int(np.floor(self.fraction * population + 0.5))


def fps_select(collection: PoseCollection, n: int, start, align: bool = True) -> list:
    """Pick ``n`` frame ids by furthest-point sampling, beginning at ``start``.

    Distances are MPJPE between yaw-aligned poses (``align=False`` compares raw
    coordinates). Ties go to the lowest frame id.
    """
    if not 1 <= n <= len(collection):
        raise InputError(f"n must be between 1 and {len(collection)}, got {n}")
    start_pos = collection.position(start)
    poses = collection.aligned() if align else collection.poses
    picks = _kernels.fps_greedy(np.ascontiguousarray(poses), start_pos, n, collection.rank)
    return [collection.ids[i] for i in picks]


def generate_subsets(collection: PoseCollection, spec: SubsetSpec, seed: int = 0, align: bool = True) -> list:
    """Run ``spec.subset_count`` FPS passes from distinct start frames."""
    population = len(collection)
    if spec.subset_count > population:
        raise InputError(f"cannot draw {spec.subset_count} distinct starts from {population} frames")
    n = spec.subset_size(population)
    if n < 1:
        raise InputError(f"fraction {spec.fraction} of {population} frames selects nothing")
    if spec.starts is not None:
        starts = list(spec.starts)
    else:
        rng = np.random.default_rng(seed)
        starts = [collection.ids[i] for i in rng.choice(population, size=spec.subset_count, replace=False)]
    return [fps_select(collection, n, s, align=align) for s in starts]
