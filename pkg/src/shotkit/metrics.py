"""Benchmark scoring: Top@1 frame accuracy, IoU-threshold accuracy and TAL mAP.

Intervals are inclusive 0-based frame ranges everywhere. Pose queries are
scored against a +/-4 frame window around their key frame; Content, Action
and Full queries use their annotated intervals unchanged.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InputError
from .retrieval import Interval, expand_frame

CATEGORIES = ("Content", "Action", "Pose", "Full")
POSE_TOLERANCE = 4
IOU_THRESHOLDS = (0.3, 0.4, 0.5, 0.6, 0.7)
# frame-to-interval margins when interval metrics score frame predictions
DEFAULT_MARGINS = {"Pose": 4, "Action": 6, "Full": 6, "Content": 6}


@dataclass(frozen=True)
class QueryAnnotation:
    query_id: str
    video_id: str
    category: str
    intervals: tuple
    video_length: int
    query: str = ""
    key_frame: int | None = None
    fine_category: str | None = None
    frame_rate: float | None = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise InputError(f"query {self.query_id!r}: unknown category {self.category!r}")
        if self.video_length < 1:
            raise InputError(f"query {self.query_id!r}: video_length must be positive")
        intervals = tuple(iv if isinstance(iv, Interval) else Interval(*iv) for iv in self.intervals)
        for iv in intervals:
            iv.check_within(self.video_length)
        if self.category == "Pose":
            if self.key_frame is None:
                raise InputError(f"Pose query {self.query_id!r} needs a key frame")
            if not 0 <= self.key_frame < self.video_length:
                raise InputError(f"query {self.query_id!r}: key frame {self.key_frame} outside the video")
        elif not intervals:
            raise InputError(f"query {self.query_id!r} needs at least one ground-truth interval")
        object.__setattr__(self, "intervals", intervals)


@dataclass(frozen=True)
class Prediction:
    query_id: str
    frame: int | None = None
    interval: Interval | None = None
    score: float = 0.0

    def __post_init__(self):
        if (self.frame is None) == (self.interval is None):
            raise InputError(f"prediction {self.query_id!r} must carry exactly one of frame or interval")
        if self.interval is not None and not isinstance(self.interval, Interval):
            object.__setattr__(self, "interval", Interval(*self.interval))
        if self.frame is not None and self.frame < 0:
            raise InputError(f"prediction {self.query_id!r}: negative frame {self.frame}")


def effective_intervals(ann: QueryAnnotation, tolerance: int = POSE_TOLERANCE) -> list:
    """Scoring intervals: key frame +/- tolerance for Pose, annotated intervals otherwise."""
    if ann.category == "Pose":
        if ann.key_frame is None:
            raise InputError(f"Pose query {ann.query_id!r} needs a key frame")
        return [expand_frame(ann.key_frame, tolerance, ann.video_length)]
    return list(ann.intervals)


def top1_hit(frame: int, ann: QueryAnnotation) -> bool:
    return any(frame in iv for iv in effective_intervals(ann))


def interval_iou(a: Interval, b: Interval) -> float:
    """Intersection over union with inclusive frame counting."""
    inter = min(a.end, b.end) - max(a.start, b.start) + 1
    if inter <= 0:
        return 0.0
    return inter / (len(a) + len(b) - inter)


def _index_predictions(preds, anns):
    by_id = {a.query_id: a for a in anns}
    if len(by_id) != len(anns):
        raise InputError("duplicate query ids in annotations")
    index = {}
    unknown = []
    for p in preds:
        if p.query_id not in by_id:
            unknown.append(p.query_id)
            continue
        if p.query_id in index:
            raise InputError(f"more than one prediction for query {p.query_id!r}")
        ann = by_id[p.query_id]
        last = p.frame if p.frame is not None else p.interval.end
        if last >= ann.video_length:
            raise InputError(f"prediction for {p.query_id!r} exceeds video length {ann.video_length}")
        index[p.query_id] = p
    if unknown:
        raise InputError(f"predictions reference unknown query ids: {sorted(unknown)}")
    return index


def _category_order(anns):
    present = {a.category for a in anns}
    return [c for c in CATEGORIES if c in present]


@dataclass
class BestShotResult:
    accuracy: dict
    hits: dict
    counts: dict
    missing: list

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "hits": self.hits, "counts": self.counts, "missing": self.missing}


def eval_bestshot(preds, anns) -> BestShotResult:
    """Top@1 accuracy per category and overall; queries without a prediction count as misses."""
    anns = list(anns)
    index = _index_predictions(preds, anns)
    hits = defaultdict(int)
    counts = defaultdict(int)
    missing = []
    for ann in anns:
        counts[ann.category] += 1
        p = index.get(ann.query_id)
        if p is None:
            missing.append(ann.query_id)
            continue
        frame = p.frame if p.frame is not None else (p.interval.start + p.interval.end) // 2
        if top1_hit(frame, ann):
            hits[ann.category] += 1
    order = _category_order(anns)
    accuracy = {c: hits[c] / counts[c] for c in order}
    total = sum(counts.values())
    accuracy["overall"] = sum(hits.values()) / total if total else 0.0
    return BestShotResult(
        accuracy=accuracy,
        hits={c: hits[c] for c in order} | {"overall": sum(hits.values())},
        counts={c: counts[c] for c in order} | {"overall": total},
        missing=missing,
    )


def prediction_interval(p: Prediction, ann: QueryAnnotation, margins=None) -> Interval:
    if p.interval is not None:
        return p.interval
    margins = DEFAULT_MARGINS if margins is None else margins
    return expand_frame(p.frame, margins[ann.category], ann.video_length)


def best_iou(p: Prediction, ann: QueryAnnotation, margins=None) -> float:
    pred = prediction_interval(p, ann, margins)
    return max(interval_iou(pred, gt) for gt in effective_intervals(ann))


@dataclass
class IoUResult:
    thresholds: tuple
    accuracy: dict  # category -> list of accuracies per threshold
    average: dict  # category -> mean over thresholds

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "accuracy": {c: list(v) for c, v in self.accuracy.items()},
            "average": self.average,
        }


def iou_accuracy(preds, anns, thresholds=IOU_THRESHOLDS, margins=None) -> IoUResult:
    """Fraction of queries whose prediction reaches IoU >= t with a ground-truth interval.

    Frame predictions are first widened by the per-category margin.
    """
    anns = list(anns)
    thresholds = tuple(float(t) for t in thresholds)
    index = _index_predictions(preds, anns)
    ious = defaultdict(list)
    for ann in anns:
        p = index.get(ann.query_id)
        value = 0.0 if p is None else best_iou(p, ann, margins)
        ious[ann.category].append(value)
        ious["overall"].append(value)
    accuracy, average = {}, {}
    for c in [*_category_order(anns), "overall"]:
        vals = np.asarray(ious[c])
        row = [float((vals >= t).mean()) if vals.size else 0.0 for t in thresholds]
        accuracy[c] = row
        average[c] = float(np.mean(row)) if row else 0.0
    return IoUResult(thresholds, accuracy, average)


@dataclass(frozen=True)
class Detection:
    video_id: str
    label: str
    start: int
    end: int
    score: float

    @property
    def interval(self) -> Interval:
        return Interval(self.start, self.end)


@dataclass(frozen=True)
class GroundTruth:
    video_id: str
    label: str
    start: int
    end: int

    @property
    def interval(self) -> Interval:
        return Interval(self.start, self.end)


def iou_matrix(pred_bounds, gt_bounds) -> np.ndarray:
    """Pairwise inclusive-frame IoU of (P, 2) and (G, 2) bound arrays."""
    p = np.asarray(pred_bounds, dtype=np.float64).reshape(-1, 2)
    g = np.asarray(gt_bounds, dtype=np.float64).reshape(-1, 2)
    inter = np.minimum(p[:, None, 1], g[None, :, 1]) - np.maximum(p[:, None, 0], g[None, :, 0]) + 1
    inter = np.maximum(inter, 0.0)
    union = (p[:, 1] - p[:, 0] + 1)[:, None] + (g[:, 1] - g[:, 0] + 1)[None, :] - inter
    return inter / union


def average_precision(tp, num_gt: int) -> float:
    """All-point interpolated AP from true-positive flags in ranked order."""
    tp = np.asarray(tp, dtype=np.float64)
    if num_gt == 0 or tp.size == 0:
        return 0.0
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(1.0 - tp)
    recall = tp_cum / num_gt
    precision = tp_cum / (tp_cum + fp_cum)
    mprec = np.concatenate([[0.0], precision, [0.0]])
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mprec = np.maximum.accumulate(mprec[::-1])[::-1]
    idx = np.flatnonzero(mrec[1:] != mrec[:-1]) + 1
    return float(np.sum((mrec[idx] - mrec[idx - 1]) * mprec[idx]))


@dataclass
class TALResult:
    thresholds: tuple
    map: list  # mAP per threshold
    mean_map: float
    ap: dict = field(default_factory=dict)  # label -> AP per threshold
    excluded_classes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "map": self.map,
            "mean_map": self.mean_map,
            "ap": self.ap,
            "excluded_classes": self.excluded_classes,
            "warnings": len(self.excluded_classes),
        }


def class_tp_flags(dets, gts, threshold: float) -> np.ndarray:
    """True-positive flag per detection, detections given in ranked order."""
    if not dets:
        return np.zeros(0, dtype=bool)
    iou = iou_matrix([(d.start, d.end) for d in dets], [(g.start, g.end) for g in gts])
    if gts:
        same = np.array([d.video_id for d in dets])[:, None] == np.array([g.video_id for g in gts])[None, :]
        iou = np.where(same, iou, -1.0)
    return _kernels.greedy_match(np.ascontiguousarray(iou), float(threshold))


def tal_map(dets, gts, thresholds=IOU_THRESHOLDS) -> TALResult:
    """Temporal-localization mAP per IoU threshold and its mean.

    Per class, detections are ranked by descending score (input order breaks
    ties) and greedily matched one-to-one to same-video ground truths. Classes
    with no ground truth are excluded and reported.
    """
    thresholds = tuple(float(t) for t in thresholds)
    if any(t <= 0.0 for t in thresholds):
        raise InputError("IoU thresholds must be positive")
    dets_by = defaultdict(list)
    gts_by = defaultdict(list)
    for d in dets:
        dets_by[d.label].append(d)
    for g in gts:
        gts_by[g.label].append(g)
    excluded = sorted(set(dets_by) - set(gts_by))
    ap = {}
    for label in sorted(gts_by):
        ranked = sorted(dets_by.get(label, []), key=lambda d: -d.score)
        cls_gts = gts_by[label]
        ap[label] = [average_precision(class_tp_flags(ranked, cls_gts, t), len(cls_gts)) for t in thresholds]
    if ap:
        maps = [float(np.mean([ap[c][i] for c in ap])) for i in range(len(thresholds))]
    else:
        maps = [0.0] * len(thresholds)
    return TALResult(thresholds, maps, float(np.mean(maps)) if maps else 0.0, ap, excluded)


def hit_count_by_category(preds, anns) -> dict:
    """Top@1 hits grouped by fine-grained tag; untagged queries fall under "other"."""
    anns = list(anns)
    index = _index_predictions(preds, anns)
    counts = {}
    for ann in anns:
        tag = ann.fine_category or "other"
        counts.setdefault(tag, 0)
        p = index.get(ann.query_id)
        if p is None:
            continue
        frame = p.frame if p.frame is not None else (p.interval.start + p.interval.end) // 2
        if top1_hit(frame, ann):
            counts[tag] += 1
    return dict(sorted(counts.items()))


@dataclass
class EvalReport:
    """Collected evaluation sections; any of them may be absent."""

    bestshot: BestShotResult | None = None
    iou: IoUResult | None = None
    tal: TALResult | None = None
    hit_counts: dict | None = None

    def to_dict(self) -> dict:
        out = {}
        if self.bestshot is not None:
            out["bestshot"] = self.bestshot.to_dict()
        if self.iou is not None:
            out["iou"] = self.iou.to_dict()
        if self.tal is not None:
            out["tal"] = self.tal.to_dict()
        if self.hit_counts is not None:
            out["hit_counts"] = self.hit_counts
        return out

    def format_table(self) -> str:
        """Plain-text tables, one block per section."""
        blocks = []
        if self.bestshot is not None:
            r = self.bestshot
            rows = [(c, f"{r.hits[c]}/{r.counts[c]}", f"{100 * r.accuracy[c]:.1f}") for c in r.accuracy]
            blocks.append(_table(("category", "hits", "top@1"), rows))
            if r.missing:
                blocks.append(f"missing predictions: {len(r.missing)}")
        if self.iou is not None:
            r = self.iou
            header = ("category", *[f"{t:.1f}" for t in r.thresholds], "avg")
            rows = [(c, *[f"{100 * a:.1f}" for a in accs], f"{100 * r.average[c]:.1f}")
                    for c, accs in r.accuracy.items()]
            blocks.append(_table(header, rows))
        if self.tal is not None:
            r = self.tal
            header = ("class", *[f"{t:.1f}" for t in r.thresholds], "avg")
            rows = [(c, *[f"{100 * a:.2f}" for a in aps], f"{100 * np.mean(aps):.2f}") for c, aps in r.ap.items()]
            rows.append(("mAP", *[f"{100 * m:.2f}" for m in r.map], f"{100 * r.mean_map:.2f}"))
            blocks.append(_table(header, rows))
        if self.hit_counts is not None:
            blocks.append(_table(("fine category", "hits"), [(k, str(v)) for k, v in self.hit_counts.items()]))
        return "\n\n".join(blocks) + "\n"


def _table(header, rows) -> str:
    cells = [tuple(str(x) for x in header)] + [tuple(str(x) for x in r) for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for n, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))))
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
