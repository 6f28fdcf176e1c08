"""Geometric pose measurements and their discretization into posecodes.

A posecode pairs one scalar measurement of a pose (an elbow angle, the height
of a hand relative to the head, the global body yaw...) with the category it
falls into under a configurable set of bin edges.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DegeneratePoseError, InputError
from .kinematics import Skeleton, check_pose, facing_from_joints, yaw_of

KINDS = ("angle", "distance", "relative", "pitch", "ground", "orientation")
AXES = {"lateral": 0, "vertical": 1, "depth": 2}
_ARITY = {"angle": 3, "distance": 2, "relative": 2, "pitch": 2, "ground": 1, "orientation": 3}
ANGLE_EPS = 1e-9
INDETERMINATE = "orientation indeterminate"


@dataclass(frozen=True)
class PosecodeKind:
    """What to measure: a kind name, the joint indices involved and, for
    relative positions, the axis.

    Orientation kinds reference the (left hip, right hip, spine) joints that
    define the facing direction.
    """

    kind: str
    joints: tuple
    axis: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown posecode kind {self.kind!r}")
        joints = tuple(int(j) for j in self.joints)
        if len(joints) != _ARITY[self.kind]:
            raise InputError(f"{self.kind} needs {_ARITY[self.kind]} joints, got {len(joints)}")
        if len(set(joints)) != len(joints):
            raise InputError(f"{self.kind} joints must be distinct, got {joints}")
        if (self.kind == "relative") != (self.axis is not None):
            raise InputError("an axis is required for relative kinds and only for them")
        if self.axis is not None and self.axis not in AXES:
            raise InputError(f"unknown axis {self.axis!r}")
        object.__setattr__(self, "joints", joints)

    @property
    def mirror_flips(self) -> bool:
        """True when mirroring negates the measured value."""
        return self.kind == "orientation" or self.axis == "lateral"


@dataclass(frozen=True)
class Measurement:
    kind: PosecodeKind
    value: float


@dataclass(frozen=True)
class BinSpec:
    """Edges and labels for one family of measurements.

    ``labels[i]`` covers values with exactly ``i`` edges strictly below them,
    so a value sitting on an edge belongs to the upper bin.
    """

    edges: tuple
    labels: tuple
    skippable: frozenset = frozenset()
    template: str = "state"
    opposites: dict = field(default_factory=dict)
    merged: dict = field(default_factory=dict)

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        labels = tuple(self.labels)
        if len(labels) != len(edges) + 1:
            raise InputError(f"need {len(edges) + 1} labels for {len(edges)} edges, got {len(labels)}")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise InputError(f"bin edges must be strictly increasing: {edges}")
        if not all(np.isfinite(edges)):
            raise InputError("bin edges must be finite")
        known = set(labels)
        extra = (set(self.skippable) | set(self.opposites) | set(self.opposites.values()) | set(self.merged)) - known
        if extra:
            raise InputError(f"labels not defined by this bin set: {sorted(extra)}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "skippable", frozenset(self.skippable))

    def opposite(self, label: str) -> str:
        return self.opposites.get(label, label)


@dataclass(frozen=True)
class BinConfig:
    bins: dict
    config_version: str = "custom"
    jitter: float = 0.0

    def __getitem__(self, name: str) -> BinSpec:
        try:
            return self.bins[name]
        except KeyError:
            raise InputError(f"no bin set named {name!r}") from None


@dataclass(frozen=True)
class CategorizedPosecode:
    kind: PosecodeKind
    label: str
    value: float
    skippable: bool = False
    entry: int | None = None  # roster position, when produced by extract_all


@dataclass(frozen=True)
class RosterEntry:
    """One posecode to extract, with the phrases used to describe it."""

    kind: str
    joints: tuple
    bins: str
    subject: str
    axis: str | None = None
    object: str | None = None
    subject_plural: str | None = None
    object_plural: str | None = None
    plural: bool = False


@dataclass(frozen=True, eq=False)
class Roster:
    """Roster entries bound to a skeleton.

    ``mirror[i]`` is the entry measuring the mirror image of entry ``i`` (or
    -1 when there is none) and ``mirror_reversed[i]`` tells whether that entry
    lists the mirrored joints in the opposite order. ``side[i]`` is "left",
    "right" or None depending on the first paired joint of the entry.
    """

    entries: tuple
    kinds: tuple
    mirror: tuple
    mirror_reversed: tuple
    side: tuple
    config_version: str = "custom"

    def __len__(self):
        return len(self.entries)


def _load_json(path, default_name):
    if path is None:
        return json.loads(resources.files("shotkit").joinpath(f"data/{default_name}").read_text())
    return json.loads(Path(path).read_text())


def bin_config_from_dict(data: dict) -> BinConfig:
    specs = {}
    for name, raw in data["bins"].items():
        scale = np.pi / 180.0 if raw.get("unit", "m") == "deg" else 1.0
        specs[name] = BinSpec(
            edges=[e * scale for e in raw["edges"]],
            labels=raw["labels"],
            skippable=raw.get("skippable", ()),
            template=raw.get("template", "state"),
            opposites=dict(raw.get("opposites", {})),
            merged=dict(raw.get("merged", {})),
        )
    return BinConfig(specs, data.get("config_version", "custom"), float(data.get("jitter", 0.0)))


def load_bin_config(path=None) -> BinConfig:
    """Load bin edges; angle-like sets may be given in degrees (``"unit": "deg"``)."""
    try:
        return bin_config_from_dict(_load_json(path, "posecode_bins.json"))
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed bin config: {exc}") from exc


def load_roster(skeleton: Skeleton, path=None) -> Roster:
    data = _load_json(path, "posecode_roster.json")
    try:
        entries = [
            RosterEntry(
                kind=e["kind"], joints=tuple(e["joints"]), bins=e["bins"], subject=e["subject"],
                axis=e.get("axis"), object=e.get("object"),
                subject_plural=e.get("subject_plural"), object_plural=e.get("object_plural"),
                plural=bool(e.get("plural", False)),
            )
            for e in data["entries"]
        ]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed roster: {exc}") from exc
    return bind_roster(entries, skeleton, data.get("config_version", "custom"))


def bind_roster(entries, skeleton: Skeleton, config_version: str = "custom") -> Roster:
    """Resolve joint names against ``skeleton`` and pair up mirror-image entries."""
    entries = tuple(entries)
    kinds = tuple(
        PosecodeKind(e.kind, [skeleton.index(j) if isinstance(j, str) else j for j in e.joints], e.axis)
        for e in entries
    )
    lookup = {(k.kind, k.axis, e.bins, k.joints): i for i, (k, e) in enumerate(zip(kinds, entries))}
    mi = skeleton.mirror_index
    paired = {j for pair in skeleton.left_right_pairs for j in pair}
    left_joints = {pair[0] for pair in skeleton.left_right_pairs}
    mirror, reversed_, side = [], [], []
    for k, e in zip(kinds, entries):
        mj = tuple(int(mi[j]) for j in k.joints)
        hit = lookup.get((k.kind, k.axis, e.bins, mj))
        rev = False
        if hit is None and k.kind in ("angle", "distance", "relative"):
            hit = lookup.get((k.kind, k.axis, e.bins, mj[::-1]))
            rev = hit is not None and k.kind == "relative"
        mirror.append(-1 if hit is None else hit)
        reversed_.append(rev)
        first = next((j for j in k.joints if j in paired), None)
        side.append(None if first is None else ("left" if first in left_joints else "right"))
    return Roster(entries, kinds, tuple(mirror), tuple(reversed_), tuple(side), config_version)


def _angle_at(pose, a, pivot, b, joints):
    u = pose[a] - pose[pivot]
    v = pose[b] - pose[pivot]
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < ANGLE_EPS or nv < ANGLE_EPS:
        raise DegeneratePoseError(f"angle undefined for joint triple {joints}: coincident joints")
    # atan2 form stays accurate near 0 and pi, where arccos loses precision
    return float(np.arctan2(np.linalg.norm(np.cross(u, v)), np.dot(u, v)))


def measure(pose, kind: PosecodeKind) -> Measurement:
    """Evaluate one scalar measurement on a pose.

    Angles, pitches and the body yaw are in radians; distances, relative
    positions and ground heights in meters.
    """
    pose = check_pose(pose)
    if max(kind.joints) >= pose.shape[0]:
        raise InputError(f"{kind} references joints beyond the pose's {pose.shape[0]} joints")
    j = kind.joints
    if kind.kind == "angle":
        value = _angle_at(pose, j[0], j[1], j[2], j)
    elif kind.kind == "distance":
        value = float(np.linalg.norm(pose[j[0]] - pose[j[1]]))
    elif kind.kind == "relative":
        ax = AXES[kind.axis]
        value = float(pose[j[0], ax] - pose[j[1], ax])
    elif kind.kind == "pitch":
        d = pose[j[1]] - pose[j[0]]
        value = float(np.arctan2(d[1], np.hypot(d[0], d[2])))
    elif kind.kind == "ground":
        value = float(pose[j[0], 1] - pose[:, 1].min())
    else:
        facing = facing_from_joints(pose, *j)
        if facing is None:
            raise DegeneratePoseError(f"body facing undefined for joints {j}")
        value = yaw_of(facing)
    return Measurement(kind, value)


def categorize(m: Measurement, bins: BinSpec, jitter: float = 0.0, rng=None) -> CategorizedPosecode:
    """Map a measurement to its bin label.

    ``jitter`` perturbs each edge uniformly in [-jitter, jitter] using ``rng``
    (a numpy Generator); with the default of 0 binning is deterministic.
    """
    edges = np.asarray(bins.edges)
    if jitter > 0.0:
        if rng is None:
            raise InputError("edge jitter needs an explicit random generator")
        edges = np.sort(edges + rng.uniform(-jitter, jitter, size=edges.shape))
    idx = int(np.searchsorted(edges, m.value, side="right"))
    label = bins.labels[idx]
    return CategorizedPosecode(m.kind, label, m.value, label in bins.skippable)


def extract_all(pose, skeleton: Skeleton, config: BinConfig, roster: Roster, rng=None) -> list:
    """Measure and categorize every roster entry, in roster order."""
    pose = check_pose(pose, skeleton)
    if config.jitter > 0.0 and rng is None:
        rng = np.random.default_rng(0)
    codes = []
    for i, (kind, entry) in enumerate(zip(roster.kinds, roster.entries)):
        try:
            m = measure(pose, kind)
        except DegeneratePoseError as exc:
            raise DegeneratePoseError(f"roster entry {i} ({entry.subject}): {exc}") from exc
        code = categorize(m, config[entry.bins], config.jitter, rng)
        codes.append(CategorizedPosecode(code.kind, code.label, code.value, code.skippable, i))
    return codes


def orientation_kind(skeleton: Skeleton) -> PosecodeKind | None:
    if skeleton.facing_joints is None:
        return None
    return PosecodeKind("orientation", skeleton.facing_joints)


def body_orientation_code(pose, skeleton: Skeleton, bins) -> CategorizedPosecode:
    """Discretize the global body yaw into the orientation sectors.

    ``bins`` is either the orientation :class:`BinSpec` or a :class:`BinConfig`
    holding one under ``"orientation"``. Degenerate facings yield the label
    ``"orientation indeterminate"`` with a NaN value.
    """
    spec = bins["orientation"] if isinstance(bins, BinConfig) else bins
    pose = check_pose(pose, skeleton)
    kind = orientation_kind(skeleton)
    if kind is None:
        return CategorizedPosecode(None, INDETERMINATE, float("nan"), True)
    try:
        m = measure(pose, kind)
    except DegeneratePoseError:
        return CategorizedPosecode(kind, INDETERMINATE, float("nan"), True)
    return categorize(m, spec)
