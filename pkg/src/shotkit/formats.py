"""On-disk formats: JSONL record files and the SHOTMAT1 binary matrix.

Every JSONL line is one object; a ``schema`` field, when present, must match
the record type. Load errors name the file, the line number and the field.

SHOTMAT1 layout: 8-byte magic ``b"SHOTMAT1"``, little-endian u32 rows, u32
cols, u8 normalized flag, then rows*cols little-endian float32 values.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .metrics import Detection, GroundTruth, Prediction, QueryAnnotation
from .retrieval import Interval

MAGIC = b"SHOTMAT1"
_HEADER = struct.Struct("<8sIIB")

POSE_SCHEMA = "shotkit.pose/1"
ANNOTATION_SCHEMA = "shotkit.annotation/1"
PREDICTION_SCHEMA = "shotkit.prediction/1"
DETECTION_SCHEMA = "shotkit.detection/1"
TAL_GT_SCHEMA = "shotkit.tal-gt/1"


# ---------------------------------------------------------------- matrices

def save_matrix(path, matrix, normalized: bool = False) -> None:
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise InputError(f"matrix must be 2-D, got shape {m.shape}")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols, 1 if normalized else 0))
        fh.write(np.ascontiguousarray(m, dtype="<f4").tobytes())


def load_matrix(path):
    """Return ``(matrix as float32, normalized flag)``."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise InputError(f"{path}: truncated header: expected {_HEADER.size} bytes, got {len(data)}")
    magic, rows, cols, flag = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise InputError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if flag not in (0, 1):
        raise InputError(f"{path}: normalized flag must be 0 or 1, got {flag}")
    expected = _HEADER.size + 4 * rows * cols
    if len(data) != expected:
        kind = "truncated" if len(data) < expected else "oversized"
        raise InputError(f"{path}: {kind} matrix {rows}x{cols}: expected {expected} bytes, got {len(data)}")
    m = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(rows, cols).astype(np.float32)
    return m, bool(flag)


# ---------------------------------------------------------------- JSONL plumbing

def iter_jsonl(path):
    """Yield ``(line number, object)`` for each non-blank line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise InputError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def write_jsonl(path, objects) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objects:
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


class _Line:
    """Field accessor that turns type problems into located errors."""

    def __init__(self, path, lineno, obj, schema):
        self.where = f"{path}:{lineno}"
        self.obj = obj
        found = obj.get("schema", schema)
        if found != schema:
            raise InputError(f"{self.where}: field 'schema': expected {schema!r}, got {found!r}")

    def fail(self, name, msg):
        raise InputError(f"{self.where}: field {name!r}: {msg}")

    def get(self, name, kind, required=True, default=None):
        if name not in self.obj or self.obj[name] is None:
            if required:
                self.fail(name, "missing")
            return default
        value = self.obj[name]
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(name, f"expected an integer, got {value!r}")
        elif kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                self.fail(name, f"expected a finite number, got {value!r}")
            value = float(value)
        elif kind is str:
            if not isinstance(value, str):
                self.fail(name, f"expected a string, got {value!r}")
        elif kind is list:
            if not isinstance(value, list):
                self.fail(name, f"expected a list, got {value!r}")
        return value

    def wrap(self, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InputError as exc:
            raise InputError(f"{self.where}: {exc}") from None


def _check_unique(ids_seen, key, where, what):
    if key in ids_seen:
        raise InputError(f"{where}: duplicate {what} {key!r} (first on line {ids_seen[key]})")


# ---------------------------------------------------------------- poses

@dataclass
class PoseRecord:
    id: str
    dataset: str
    frame: int
    joints: np.ndarray
    rotations: np.ndarray | None = None
    description: str | None = None

    def to_dict(self) -> dict:
        out = {"schema": POSE_SCHEMA, "id": self.id, "dataset": self.dataset, "frame": self.frame,
               "joints": np.asarray(self.joints, dtype=np.float64).tolist()}
        if self.rotations is not None:
            out["rotations"] = np.asarray(self.rotations, dtype=np.float64).tolist()
        if self.description is not None:
            out["description"] = self.description
        return out

    def __eq__(self, other):
        if not isinstance(other, PoseRecord):
            return NotImplemented
        rot_equal = (self.rotations is None and other.rotations is None) or (
            self.rotations is not None and other.rotations is not None
            and np.array_equal(self.rotations, other.rotations))
        return (self.id, self.dataset, self.frame, self.description) == (
            other.id, other.dataset, other.frame, other.description
        ) and np.array_equal(self.joints, other.joints) and rot_equal


def _joint_array(line, name, num_joints, required):
    raw = line.get(name, list, required)
    if raw is None:
        return None
    try:
        arr = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError):
        line.fail(name, "expected a list of [x, y, z] triples")
    if arr.ndim != 2 or arr.shape[1] != 3:
        line.fail(name, f"expected shape (J, 3), got {arr.shape}")
    if num_joints is not None and arr.shape[0] != num_joints:
        line.fail(name, f"expected {num_joints} joints, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        line.fail(name, "values must be finite")
    return arr


def load_poses(path, num_joints: int | None = None) -> list:
    records = []
    seen = {}
    for lineno, obj in iter_jsonl(path):
        line = _Line(path, lineno, obj, POSE_SCHEMA)
        rid = line.get("id", str)
        _check_unique(seen, rid, line.where, "pose id")
        seen[rid] = lineno
        frame = line.get("frame", int)
        if frame < 0:
            line.fail("frame", "must be non-negative")
        records.append(PoseRecord(
            id=rid,
            dataset=line.get("dataset", str),
            frame=frame,
            joints=_joint_array(line, "joints", num_joints, True),
            rotations=_joint_array(line, "rotations", num_joints, False),
            description=line.get("description", str, required=False),
        ))
    return records


def save_poses(path, records) -> None:
    write_jsonl(path, (r.to_dict() for r in records))


# ---------------------------------------------------------------- annotations and predictions

def seconds_to_frames(start: float, end: float, fps: float) -> tuple:
    """Inclusive frame range covering the time range [start, end) seconds."""
    first = int(math.floor(start * fps + 1e-9))
    last = max(first, int(math.ceil(end * fps - 1e-9)) - 1)
    return first, last


def _interval_list(line, name, fps):
    raw = line.get(name, list, required=False, default=[])
    out = []
    for iv in raw:
        if not isinstance(iv, list) or len(iv) != 2:
            line.fail(name, f"expected [start, end] pairs, got {iv!r}")
        if fps is None:
            if not all(isinstance(v, int) and not isinstance(v, bool) for v in iv):
                line.fail(name, f"frame bounds must be integers, got {iv!r}")
            out.append(line.wrap(Interval, *iv))
        else:
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in iv):
                line.fail(name, f"time bounds must be numbers, got {iv!r}")
            out.append(line.wrap(Interval, *seconds_to_frames(iv[0], iv[1], fps)))
    return tuple(out)


def load_annotations(path, fps: float | None = None) -> list:
    """Query annotations; with ``fps`` the interval and key-frame fields are read as seconds.

    See ``seconds_to_frames`` for the rounding.
    """
    if fps is not None and not fps > 0:
        raise InputError("fps must be positive")
    anns = []
    seen = {}
    for lineno, obj in iter_jsonl(path):
        line = _Line(path, lineno, obj, ANNOTATION_SCHEMA)
        qid = line.get("query_id", str)
        _check_unique(seen, qid, line.where, "query id")
        seen[qid] = lineno
        key = line.get("key_frame", float if fps else int, required=False)
        if key is not None and fps is not None:
            key = int(math.floor(key * fps + 1e-9))
        length = line.get("video_length", int)
        anns.append(line.wrap(
            QueryAnnotation,
            query_id=qid,
            video_id=line.get("video_id", str),
            category=line.get("category", str),
            intervals=_interval_list(line, "intervals", fps),
            video_length=length,
            query=line.get("query", str, required=False, default=""),
            key_frame=key,
            fine_category=line.get("fine_category", str, required=False),
            frame_rate=line.get("frame_rate", float, required=False),
        ))
    return anns


def annotation_to_dict(ann: QueryAnnotation) -> dict:
    out = {"schema": ANNOTATION_SCHEMA, "query_id": ann.query_id, "video_id": ann.video_id,
           "category": ann.category, "query": ann.query,
           "intervals": [iv.to_list() for iv in ann.intervals], "video_length": ann.video_length}
    for name in ("key_frame", "fine_category", "frame_rate"):
        if getattr(ann, name) is not None:
            out[name] = getattr(ann, name)
    return out


def save_annotations(path, anns) -> None:
    write_jsonl(path, (annotation_to_dict(a) for a in anns))


def load_predictions(path) -> list:
    preds = []
    seen = {}
    for lineno, obj in iter_jsonl(path):
        line = _Line(path, lineno, obj, PREDICTION_SCHEMA)
        qid = line.get("query_id", str)
        _check_unique(seen, qid, line.where, "query id")
        seen[qid] = lineno
        frame = line.get("frame", int, required=False)
        interval = line.get("interval", list, required=False)
        if interval is not None:
            if len(interval) != 2 or not all(isinstance(v, int) and not isinstance(v, bool) for v in interval):
                line.fail("interval", f"expected [start, end] integers, got {interval!r}")
            interval = line.wrap(Interval, *interval)
        preds.append(line.wrap(Prediction, qid, frame, interval, line.get("score", float, required=False,
                                                                          default=0.0)))
    return preds


def prediction_to_dict(p: Prediction) -> dict:
    out = {"schema": PREDICTION_SCHEMA, "query_id": p.query_id}
    if p.frame is not None:
        out["frame"] = p.frame
    else:
        out["interval"] = p.interval.to_list()
    out["score"] = p.score
    return out


def save_predictions(path, preds) -> None:
    write_jsonl(path, (prediction_to_dict(p) for p in preds))


def _load_segments(path, schema, with_score, fps):
    out = []
    for lineno, obj in iter_jsonl(path):
        line = _Line(path, lineno, obj, schema)
        video, label = line.get("video_id", str), line.get("label", str)
        if fps is None:
            start, end = line.get("start", int), line.get("end", int)
        else:
            start, end = seconds_to_frames(line.get("start", float), line.get("end", float), fps)
        line.wrap(Interval, start, end)
        if with_score:
            out.append(Detection(video, label, start, end, line.get("score", float)))
        else:
            out.append(GroundTruth(video, label, start, end))
    return out


def load_detections(path, fps: float | None = None) -> list:
    return _load_segments(path, DETECTION_SCHEMA, True, fps)


def load_tal_ground_truth(path, fps: float | None = None) -> list:
    return _load_segments(path, TAL_GT_SCHEMA, False, fps)


def save_detections(path, dets) -> None:
    write_jsonl(path, ({"schema": DETECTION_SCHEMA, "video_id": d.video_id, "label": d.label,
                        "start": d.start, "end": d.end, "score": d.score} for d in dets))


def save_tal_ground_truth(path, gts) -> None:
    write_jsonl(path, ({"schema": TAL_GT_SCHEMA, "video_id": g.video_id, "label": g.label,
                        "start": g.start, "end": g.end} for g in gts))
