"""Frame retrieval over precomputed embeddings.

Covers cosine scoring of frames against a query, single-frame selection
(argmax or 1-D non-maximum suppression) and zero-shot temporal segmentation:
pick a pseudo-label from the mean frame embedding, then threshold the
per-frame similarity curve into intervals.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InputError

NORM_TOL = 1e-4


@dataclass(frozen=True, order=True)
class Interval:
    """Inclusive, 0-based frame range."""

    start: int
    end: int

    def __post_init__(self):
        if int(self.start) != self.start or int(self.end) != self.end:
            raise InputError(f"interval bounds must be integers, got [{self.start}, {self.end}]")
        object.__setattr__(self, "start", int(self.start))
        object.__setattr__(self, "end", int(self.end))
        if self.start < 0 or self.end < self.start:
            raise InputError(f"invalid interval [{self.start}, {self.end}]")

    def __len__(self):
        return self.end - self.start + 1

    def __contains__(self, frame) -> bool:
        return self.start <= frame <= self.end

    def check_within(self, length: int) -> "Interval":
        if self.end >= length:
            raise InputError(f"interval [{self.start}, {self.end}] exceeds video length {length}")
        return self

    def to_list(self) -> list:
        return [self.start, self.end]


@dataclass(frozen=True)
class Segment:
    start: int
    end: int
    score: float

    @property
    def interval(self) -> Interval:
        return Interval(self.start, self.end)


@dataclass(frozen=True)
class SegmentationParams:
    radius: int = 2
    policy: str = "mean"  # "mean" or "mean-std"
    k: float = 0.0
    min_length: int = 3
    max_gap: int = 2

    def __post_init__(self):
        if self.radius < 0 or self.min_length < 1 or self.max_gap < 0:
            raise InputError("need radius >= 0, min_length >= 1, max_gap >= 0")
        if self.policy not in ("mean", "mean-std"):
            raise InputError(f"unknown threshold policy {self.policy!r}")


def as_embeddings(matrix, normalized: bool = False) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2:
        raise InputError(f"embeddings must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError("embeddings must be finite")
    norms = np.linalg.norm(m, axis=1)
    if normalized:
        if np.any(np.abs(norms - 1.0) > NORM_TOL):
            raise InputError("rows flagged as normalized must have unit norm")
        return m
    if np.any(norms == 0.0):
        raise InputError(f"zero-norm embedding rows: {np.flatnonzero(norms == 0.0).tolist()}")
    return m / norms[:, None]


def score_frames(query, frames, normalized: bool = False) -> np.ndarray:
    """Cosine similarity of one query vector against every frame row."""
    q = as_embeddings(query)
    f = as_embeddings(frames, normalized)
    if q.shape[0] != 1:
        raise InputError("score_frames takes a single query vector")
    if q.shape[1] != f.shape[1]:
        raise InputError(f"query dimension {q.shape[1]} does not match frame dimension {f.shape[1]}")
    return np.clip(f @ q[0], -1.0, 1.0)


def similarity_matrix(queries, frames, normalized: bool = False) -> np.ndarray:
    """Query-by-frame cosine similarities."""
    q = as_embeddings(queries, normalized)
    f = as_embeddings(frames, normalized)
    if q.shape[1] != f.shape[1]:
        raise InputError(f"query dimension {q.shape[1]} does not match frame dimension {f.shape[1]}")
    return np.clip(q @ f.T, -1.0, 1.0)


def _scores(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise InputError("scores must be a non-empty 1-D array")
    if not np.all(np.isfinite(s)):
        raise InputError("scores must be finite")
    return s


def best_frame(scores) -> int:
    """Index of the highest score; the first one wins ties."""
    return int(np.argmax(_scores(scores)))


def nms_select(scores, radius: int = 8, k: int = 1) -> list:
    """Greedy peak picking: take the best unsuppressed frame, silence +/-radius around it, repeat."""
    s = _scores(scores)
    if radius < 0 or k < 1:
        raise InputError("need radius >= 0 and k >= 1")
    return [int(i) for i in _kernels.nms_1d(s, int(radius), int(k))]


def t3al_pseudo_label(frames, class_queries, normalized: bool = False) -> int:
    """Class whose embedding is most similar to the mean frame embedding."""
    f = as_embeddings(frames, normalized)
    c = as_embeddings(class_queries, normalized)
    if f.shape[1] != c.shape[1]:
        raise InputError(f"frame dimension {f.shape[1]} does not match class dimension {c.shape[1]}")
    mean = f.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        raise InputError("mean frame embedding is zero")
    return int(np.argmax(c @ (mean / norm)))


def moving_average(scores, radius: int) -> np.ndarray:
    """Centered mean over +/-radius frames, truncated at the sequence ends."""
    s = _scores(scores)
    if radius == 0:
        return s.copy()
    csum = np.concatenate([[0.0], np.cumsum(s)])
    idx = np.arange(s.size)
    lo = np.maximum(0, idx - radius)
    hi = np.minimum(s.size, idx + radius + 1)
    return (csum[hi] - csum[lo]) / (hi - lo)


def threshold_runs(mask) -> list:
    """Maximal runs of True as inclusive (start, end) pairs."""
    padded = np.concatenate([[False], np.asarray(mask, dtype=bool), [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


def t3al_segment(scores, params: SegmentationParams | None = None) -> list:
    """Segment a similarity curve into scored intervals.

    Frames whose smoothed score is strictly above the threshold form runs;
    runs separated by at most ``max_gap`` frames are merged, then runs
    shorter than ``min_length`` are dropped. Each segment carries its peak
    smoothed score.
    """
    params = params or SegmentationParams()
    smooth = moving_average(scores, params.radius)
    threshold = smooth.mean()
    if params.policy == "mean-std":
        threshold += params.k * smooth.std()
    # round-off in the window sums must not lift a flat curve above its own mean
    tol = 1e-12 * max(1.0, float(np.abs(smooth).max()))
    runs = threshold_runs(smooth > threshold + tol)
    merged = []
    for start, end in runs:
        if merged and start - merged[-1][1] - 1 <= params.max_gap:
            merged[-1] = (merged[-1][0], end)
        else:
            merged.append((start, end))
    return [
        Segment(a, b, float(smooth[a:b + 1].max()))
        for a, b in merged
        if b - a + 1 >= params.min_length
    ]


def expand_frame(idx: int, margin: int, length: int) -> Interval:
    """Interval of +/-margin frames around ``idx``, clamped to the video."""
    if not 0 <= idx < length:
        raise InputError(f"frame {idx} outside video of length {length}")
    if margin < 0:
        raise InputError("margin must be non-negative")
    return Interval(max(0, idx - margin), min(length - 1, idx + margin))
