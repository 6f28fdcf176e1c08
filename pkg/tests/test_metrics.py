import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import ap_oracle, hit_oracle, iou_accuracy_oracle, iou_oracle, map_oracle
from shotkit.errors import InputError
from shotkit.metrics import (
    IOU_THRESHOLDS,
    DEFAULT_MARGINS,
    Detection,
    EvalReport,
    GroundTruth,
    Prediction,
    QueryAnnotation,
    average_precision,
    effective_intervals,
    eval_bestshot,
    hit_count_by_category,
    interval_iou,
    iou_accuracy,
    tal_map,
    top1_hit,
)
from shotkit.retrieval import Interval


def ann(qid, category="Action", intervals=((8, 15),), length=1000, key=None, tag=None):
    return QueryAnnotation(qid, "v", category, intervals, length, key_frame=key, fine_category=tag)


def test_effective_intervals():
    assert effective_intervals(ann("p", "Pose", (), key=100)) == [Interval(96, 104)]
    assert effective_intervals(ann("a", intervals=((8, 19),))) == [Interval(8, 19)]
    assert effective_intervals(ann("p", "Pose", (), key=2)) == [Interval(0, 6)]
    with pytest.raises(InputError):
        ann("p", "Pose", ())


def test_annotation_validation():
    with pytest.raises(InputError):
        ann("x", "Other")
    with pytest.raises(InputError):
        ann("x", intervals=((5, 1000),))
    with pytest.raises(InputError):
        ann("x", intervals=())


def test_top1_examples():
    a = ann("a")
    assert top1_hit(10, a) and not top1_hit(16, a) and top1_hit(8, a) and top1_hit(15, a)
    assert top1_hit(96, ann("p", "Pose", (), key=100))
    assert not top1_hit(95, ann("p", "Pose", (), key=100))


def test_top1_matches_oracle():
    rng = np.random.default_rng(11)
    for _ in range(2000):
        length = int(rng.integers(1, 60))
        cat = ["Content", "Action", "Pose", "Full"][int(rng.integers(4))]
        ivs = []
        for _ in range(int(rng.integers(1, 4))):
            s = int(rng.integers(length))
            ivs.append((s, int(rng.integers(s, length))))
        key = int(rng.integers(length))
        a = QueryAnnotation("q", "v", cat, ivs, length, key_frame=key)
        frame = int(rng.integers(length))
        assert top1_hit(frame, a) == hit_oracle(frame, cat, ivs, key, length)


def test_eval_bestshot_counts():
    anns = [ann(f"q{i}", ["Content", "Action", "Pose"][i % 3], key=100) for i in range(10)]
    preds = []
    for i, a in enumerate(anns):
        inside = 100 if a.category == "Pose" else 10
        preds.append(Prediction(a.query_id, inside if i < 7 else 500))
    r = eval_bestshot(preds, anns)
    assert r.accuracy["overall"] == pytest.approx(0.7)
    assert r.hits["overall"] == 7 and r.counts["overall"] == 10
    # queries 0..6 hit; categories cycle Content, Action, Pose
    assert r.accuracy["Content"] == pytest.approx(3 / 4)
    assert r.accuracy["Action"] == pytest.approx(2 / 3) and r.accuracy["Pose"] == pytest.approx(2 / 3)


def test_eval_bestshot_edge_cases():
    anns = [ann("a"), ann("b", "Content")]
    full = eval_bestshot([Prediction("a", 9), Prediction("b", 15)], anns)
    assert full.accuracy == {"Content": 1.0, "Action": 1.0, "overall": 1.0}
    empty = eval_bestshot([], anns)
    assert empty.accuracy["overall"] == 0.0 and empty.missing == ["a", "b"]
    with pytest.raises(InputError, match="zz"):
        eval_bestshot([Prediction("zz", 1), Prediction("a", 1)], anns)
    with pytest.raises(InputError):
        eval_bestshot([Prediction("a", 1), Prediction("a", 2)], anns)
    with pytest.raises(InputError):
        eval_bestshot([Prediction("a", 1000)], anns)


def test_interval_iou_examples():
    assert interval_iou(Interval(3, 9), Interval(3, 9)) == 1.0
    assert interval_iou(Interval(0, 4), Interval(5, 9)) == 0.0
    assert interval_iou(Interval(0, 9), Interval(5, 14)) == pytest.approx(1 / 3)


@given(st.integers(0, 50), st.integers(0, 20), st.integers(0, 50), st.integers(0, 20))
def test_interval_iou_properties(s1, w1, s2, w2):
    a, b = Interval(s1, s1 + w1), Interval(s2, s2 + w2)
    v = interval_iou(a, b)
    assert v == interval_iou(b, a) and 0.0 <= v <= 1.0
    assert (v == 1.0) == (a == b)
    assert v == pytest.approx(iou_oracle((a.start, a.end), (b.start, b.end)))


def test_iou_accuracy_examples():
    anns = [ann("a", intervals=((5, 14),))]
    exact = iou_accuracy([Prediction("a", interval=Interval(5, 14))], anns)
    assert exact.accuracy["overall"] == [1.0] * 5 and exact.average["overall"] == 1.0
    third = iou_accuracy([Prediction("a", interval=Interval(0, 9))], anns)
    assert third.accuracy["overall"] == [1.0, 0.0, 0.0, 0.0, 0.0]


def test_iou_accuracy_hand_table():
    anns = [
        ann("a", intervals=((10, 19),)),                # pred [10,19] -> 1.0
        ann("b", intervals=((0, 9),)),                  # pred [5,14] -> 5/15
        ann("c", "Pose", (), key=50),                   # frame 52 -> [48,56] vs [46,54]: 7/11
        ann("d", "Content", intervals=((20, 29), (40, 45))),  # pred [41,46] -> 5/7 with the 2nd
        ann("e", intervals=((0, 3),)),                  # no prediction -> 0
    ]
    preds = [Prediction("a", interval=Interval(10, 19)), Prediction("b", interval=Interval(5, 14)),
             Prediction("c", 52), Prediction("d", interval=Interval(41, 46))]
    r = iou_accuracy(preds, anns)
    # best IoUs: 1, 1/3, 7/11 = 0.636, 5/7 = 0.714, 0
    assert r.accuracy["overall"] == pytest.approx([0.8, 0.6, 0.6, 0.6, 0.4])
    assert r.average["overall"] == pytest.approx(0.6)
    assert r.accuracy["Pose"] == [1.0, 1.0, 1.0, 1.0, 0.0]


def test_iou_accuracy_matches_oracle_and_is_monotone():
    rng = np.random.default_rng(12)
    thresholds = (0.1, 0.3, 0.4, 0.5, 0.6, 0.7, 0.9)
    for _ in range(300):
        queries, anns, preds = [], [], []
        for qi in range(int(rng.integers(1, 6))):
            length = int(rng.integers(5, 80))
            cat = ["Content", "Action", "Pose", "Full"][int(rng.integers(4))]
            s = int(rng.integers(length))
            ivs = [(s, int(rng.integers(s, length)))]
            key = int(rng.integers(length))
            anns.append(QueryAnnotation(f"q{qi}", "v", cat, ivs, length, key_frame=key))
            kind = rng.integers(3)
            if kind == 0:
                pred = None
            elif kind == 1:
                pred = int(rng.integers(length))
                preds.append(Prediction(f"q{qi}", pred))
            else:
                a = int(rng.integers(length))
                pred = (a, int(rng.integers(a, length)))
                preds.append(Prediction(f"q{qi}", interval=Interval(*pred)))
            queries.append((cat, ivs, key, length, pred))
        got = iou_accuracy(preds, anns, thresholds).accuracy["overall"]
        assert got == pytest.approx(iou_accuracy_oracle(queries, thresholds, DEFAULT_MARGINS))
        assert all(a >= b for a, b in zip(got, got[1:]))


def test_tal_examples():
    gt = [GroundTruth("v", "jump", 10, 20)]
    r = tal_map([Detection("v", "jump", 10, 20, 0.9)], gt)
    assert r.map == [1.0] * 5 and r.mean_map == 1.0
    assert tal_map([], gt).mean_map == 0.0


def test_tal_hand_case():
    # 2 GTs, 3 ranked predictions: exact hit, then an overlap with the already-taken GT (FP),
    # then a partial overlap with the second GT
    gts = [GroundTruth("v", "a", 0, 9), GroundTruth("v", "a", 20, 29)]
    dets = [Detection("v", "a", 0, 9, 0.9), Detection("v", "a", 5, 14, 0.8), Detection("v", "a", 22, 33, 0.7)]
    r = tal_map(dets, gts)
    # TP, FP, TP: precision 1, 1/2, 2/3 -> AP = 0.5*1 + 0.5*(2/3)
    ap_two = 0.5 + 0.5 * 2 / 3
    # [22,33] vs [20,29]: 8/14 = 0.571 -> TP at 0.3, 0.4, 0.5 only
    assert r.map == pytest.approx([ap_two, ap_two, ap_two, 0.5, 0.5])
    for i, t in enumerate(IOU_THRESHOLDS):
        oracle = ap_oracle([(d.video_id, d.start, d.end, d.score) for d in dets],
                           [(g.video_id, g.start, g.end) for g in gts], t)
        assert r.map[i] == pytest.approx(oracle)


def test_tal_excludes_classes_without_ground_truth():
    r = tal_map([Detection("v", "ghost", 0, 3, 0.5), Detection("v", "a", 0, 3, 0.5)],
                [GroundTruth("v", "a", 0, 3)])
    assert r.excluded_classes == ["ghost"] and r.mean_map == 1.0
    assert r.to_dict()["warnings"] == 1


def test_tal_cross_video_never_matches():
    r = tal_map([Detection("v1", "a", 0, 9, 1.0)], [GroundTruth("v2", "a", 0, 9)])
    assert r.mean_map == 0.0


def test_tal_matches_oracle():
    rng = np.random.default_rng(13)
    for _ in range(500):
        gts, dets = [], []
        for _ in range(int(rng.integers(1, 6))):
            s = int(rng.integers(0, 40))
            gts.append((f"v{rng.integers(2)}", f"c{rng.integers(2)}", s, s + int(rng.integers(0, 12))))
        for _ in range(int(rng.integers(0, 11))):
            s = int(rng.integers(0, 40))
            dets.append((f"v{rng.integers(2)}", f"c{rng.integers(2)}", s, s + int(rng.integers(0, 12)),
                         float(rng.integers(0, 5))))  # few distinct scores -> ties
        r = tal_map([Detection(*d) for d in dets], [GroundTruth(*g) for g in gts])
        assert r.map == pytest.approx(map_oracle(dets, gts, IOU_THRESHOLDS), abs=1e-12)


def test_average_precision_basics():
    assert average_precision([True, True], 2) == 1.0
    assert average_precision([False, True], 1) == 0.5
    assert average_precision([], 3) == 0.0


def test_hit_counts():
    anns = [ann("a", tag="jump"), ann("b", tag="run"), ann("c", tag="jump"), ann("d")]
    all_hits = [Prediction(q, 10) for q in "abcd"]
    assert hit_count_by_category(all_hits, anns) == {"jump": 2, "other": 1, "run": 1}
    assert hit_count_by_category([], anns) == {"jump": 0, "other": 0, "run": 0}
    mixed = [Prediction("a", 10), Prediction("b", 500), Prediction("c", 500), Prediction("d", 9)]
    assert hit_count_by_category(mixed, anns) == {"jump": 1, "other": 1, "run": 0}


def test_report_rendering():
    anns = [ann("a"), ann("p", "Pose", (), key=20)]
    preds = [Prediction("a", 10), Prediction("p", 21)]
    report = EvalReport(bestshot=eval_bestshot(preds, anns), iou=iou_accuracy(preds, anns),
                        tal=tal_map([Detection("v", "x", 1, 4, 1.0)], [GroundTruth("v", "x", 1, 4)]),
                        hit_counts=hit_count_by_category(preds, anns))
    text = report.format_table()
    assert "top@1" in text and "mAP" in text and "overall" in text
    json.dumps(report.to_dict())
