"""Command-line entry point: ``shotkit <command> [options]``.

Exit codes: 0 success, 2 bad input (including usage errors), 3 pipeline
failure. Every command takes ``--seed`` and ``--config``; the config file is
a JSON object whose keys are option names (dashes or underscores) and act as
defaults that explicit flags override.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import formats
from .captioners import client_from_config
from .describer import DescriberConfig, Describer, load_templates
from .errors import InputError, PipelineError
from .kinematics import load_skeleton
from .metrics import IOU_THRESHOLDS, DEFAULT_MARGINS, EvalReport, Prediction, eval_bestshot, \
    hit_count_by_category, iou_accuracy, tal_map
from .mixing import DatasetMixer, MixSpec
from .posecode import load_bin_config, load_roster
from .pres3 import PipelineConfig, VideoInput, load_prompts, run_pipeline
from .retrieval import SegmentationParams, best_frame, nms_select, similarity_matrix, \
    t3al_pseudo_label, t3al_segment
from .sampler import PoseCollection, SubsetSpec, generate_subsets

EXIT_OK, EXIT_INPUT, EXIT_PIPELINE = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    p.add_argument("--config", help="JSON file of option defaults")


def _out(p, required=False):
    p.add_argument("--out", "-o", default="-", required=required, help="output path ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shotkit", description="Pose descriptions, pose sampling, frame retrieval and scoring.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("describe", help="poses JSONL -> descriptions JSONL")
    _common(p)
    p.add_argument("--poses", required=True)
    _out(p)
    p.add_argument("--max-sentences", type=int, default=10)
    p.add_argument("--order", choices=["fixed-roster", "seeded-shuffle"], default="fixed-roster")
    p.add_argument("--keep-skippable", action="store_true", help="keep uninformative statements")
    p.add_argument("--skeleton", help="skeleton JSON (default: bundled 22-joint skeleton)")
    p.add_argument("--bins", help="posecode bin JSON")
    p.add_argument("--roster", help="posecode roster JSON")
    p.add_argument("--templates", help="sentence template JSON")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("fps", help="poses JSONL -> furthest-point subsets")
    _common(p)
    p.add_argument("--poses", required=True)
    _out(p)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--subsets", type=int, default=1)
    p.add_argument("--starts", help="comma-separated start ids (default: seeded random)")
    p.add_argument("--no-align", action="store_true", help="compare raw coordinates")
    p.add_argument("--skeleton")
    p.set_defaults(func=cmd_fps)

    infer = sub.add_parser("infer", help="retrieval over SHOTMAT1 matrices")
    isub = infer.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    for mode, func in (("best-frame", cmd_best_frame), ("nms", cmd_nms)):
        p = isub.add_parser(mode)
        _common(p)
        p.add_argument("--sim", help="query x frame similarity matrix")
        p.add_argument("--queries", help="query embedding matrix (with --frames)")
        p.add_argument("--frames", help="frame embedding matrix (with --queries)")
        p.add_argument("--query-ids", help="text file, one query id per line (default: row numbers)")
        _out(p)
        if mode == "nms":
            p.add_argument("--radius", type=int, default=8)
            p.add_argument("--k", type=int, default=1)
        p.set_defaults(func=func)
    p = isub.add_parser("t3al")
    _common(p)
    p.add_argument("--frames", required=True, help="frame embedding matrix of one video")
    p.add_argument("--classes", required=True, help="class query embedding matrix")
    p.add_argument("--labels", required=True, help="text file, one class label per line")
    p.add_argument("--video-id", required=True)
    p.add_argument("--radius", type=int, default=2)
    p.add_argument("--policy", choices=["mean", "mean-std"], default="mean")
    p.add_argument("--k", type=float, default=0.0)
    p.add_argument("--min-length", type=int, default=3)
    p.add_argument("--max-gap", type=int, default=2)
    _out(p)
    p.set_defaults(func=cmd_t3al)

    ev = sub.add_parser("eval", help="score predictions against annotations")
    esub = ev.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    for mode, func in (("bestshot", cmd_eval_bestshot), ("iou", cmd_eval_iou), ("tal", cmd_eval_tal)):
        p = esub.add_parser(mode)
        _common(p)
        p.add_argument("--pred", required=True)
        p.add_argument("--gt", required=True)
        p.add_argument("--report", help="write the JSON report here")
        p.add_argument("--fps", type=float, help="read annotation times as seconds at this frame rate")
        if mode != "bestshot":
            p.add_argument("--thresholds", default=",".join(str(t) for t in IOU_THRESHOLDS))
        if mode == "iou":
            p.add_argument("--pose-margin", type=int, default=DEFAULT_MARGINS["Pose"])
            p.add_argument("--margin", type=int, default=DEFAULT_MARGINS["Action"],
                           help="frame-prediction margin for Content, Action and Full")
        p.set_defaults(func=func)

    pres = sub.add_parser("pres3", help="summary-first annotation pipeline")
    psub = pres.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    p = psub.add_parser("run")
    _common(p)
    p.add_argument("--frames-dir", required=True, help="directory of frame files, sorted by name")
    p.add_argument("--scores", required=True, help='JSON {"dynamic": [...], "static": [...]}')
    p.add_argument("--client", help='JSON client config, e.g. {"backend": "mock"} (default mock)')
    p.add_argument("--prompts", help="prompt JSON")
    p.add_argument("--budget", type=int, default=10)
    p.add_argument("--concurrency", type=int, default=4)
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--mix-weight", type=float, default=0.5)
    p.add_argument("--qa-count", type=int, default=12)
    _out(p)
    p.set_defaults(func=cmd_pres3)

    p = sub.add_parser("mix", help="ratio-exact interleaving of JSONL sources")
    _common(p)
    p.add_argument("--source", action="append", default=[], metavar="NAME:WEIGHT:PATH")
    p.add_argument("--total", type=int, required=True)
    _out(p)
    p.set_defaults(func=cmd_mix)
    return parser


# ---------------------------------------------------------------- helpers

def _open_out(path):
    return sys.stdout if path == "-" else open(path, "w", encoding="utf-8")


def _write_lines(path, objects):
    fh = _open_out(path)
    try:
        for obj in objects:
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


def _read_lines(path):
    return [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]


def _similarities(args):
    if args.sim:
        if args.queries or args.frames:
            raise InputError("give either --sim or --queries/--frames, not both")
        sim, _ = formats.load_matrix(args.sim)
        return np.asarray(sim, dtype=np.float64)
    if not (args.queries and args.frames):
        raise InputError("need --sim or both --queries and --frames")
    q, qn = formats.load_matrix(args.queries)
    f, fn = formats.load_matrix(args.frames)
    return similarity_matrix(q, f, normalized=qn and fn)


def _query_ids(args, count):
    if args.query_ids is None:
        return [str(i) for i in range(count)]
    ids = _read_lines(args.query_ids)
    if len(ids) != count:
        raise InputError(f"{len(ids)} query ids for {count} similarity rows")
    return ids


def _thresholds(text):
    items = text if isinstance(text, list) else str(text).split(",")
    try:
        return tuple(float(t) for t in items)
    except ValueError:
        raise InputError(f"bad threshold list {text!r}") from None


def _emit_report(args, report: EvalReport):
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    sys.stdout.write(report.format_table())


# ---------------------------------------------------------------- commands

def cmd_describe(args):
    skeleton = load_skeleton(args.skeleton)
    config = DescriberConfig(seed=args.seed, max_sentences=args.max_sentences,
                             skip_skippable=not args.keep_skippable, order=args.order)
    describer = Describer(skeleton, load_bin_config(args.bins), load_roster(skeleton, args.roster),
                          load_templates(args.templates), config)
    records = formats.load_poses(args.poses, skeleton.num_joints)
    out = []
    for rec in records:
        desc = describer(rec.joints)
        out.append({"schema": "shotkit.description/1", "id": rec.id, "sentences": list(desc.sentences),
                    "text": desc.text, "config_version": desc.config_version, "seed": desc.seed})
    _write_lines(args.out, out)


def cmd_fps(args):
    skeleton = load_skeleton(args.skeleton)
    records = formats.load_poses(args.poses, skeleton.num_joints)
    if not records:
        raise InputError(f"{args.poses}: no poses")
    collection = PoseCollection([r.id for r in records], np.stack([r.joints for r in records]), skeleton)
    starts = tuple(args.starts.split(",")) if args.starts else None
    spec = SubsetSpec(args.fraction, args.subsets, starts)
    subsets = generate_subsets(collection, spec, seed=args.seed, align=not args.no_align)
    _write_lines(args.out, ({"schema": "shotkit.subset/1", "subset": i, "start": ids[0], "ids": ids}
                            for i, ids in enumerate(subsets)))


def cmd_best_frame(args):
    sim = _similarities(args)
    ids = _query_ids(args, sim.shape[0])
    _write_lines(args.out, (formats.prediction_to_dict(Prediction(qid, best_frame(row), score=float(row.max())))
                            for qid, row in zip(ids, sim)))


def cmd_nms(args):
    sim = _similarities(args)
    ids = _query_ids(args, sim.shape[0])
    out = []
    for qid, row in zip(ids, sim):
        picks = nms_select(row, args.radius, args.k)
        rec = formats.prediction_to_dict(Prediction(qid, picks[0], score=float(row[picks[0]])))
        rec["picks"] = picks
        out.append(rec)
    _write_lines(args.out, out)


def cmd_t3al(args):
    frames, fnorm = formats.load_matrix(args.frames)
    classes, cnorm = formats.load_matrix(args.classes)
    labels = _read_lines(args.labels)
    if len(labels) != classes.shape[0]:
        raise InputError(f"{len(labels)} labels for {classes.shape[0]} class embeddings")
    label = t3al_pseudo_label(frames, classes, normalized=fnorm and cnorm)
    scores = similarity_matrix(classes[label], frames, normalized=fnorm and cnorm)[0]
    params = SegmentationParams(args.radius, args.policy, args.k, args.min_length, args.max_gap)
    segs = t3al_segment(scores, params)
    _write_lines(args.out, ({"schema": formats.DETECTION_SCHEMA, "video_id": args.video_id,
                             "label": labels[label], "start": s.start, "end": s.end, "score": s.score}
                            for s in segs))


def cmd_eval_bestshot(args):
    anns = formats.load_annotations(args.gt, args.fps)
    preds = formats.load_predictions(args.pred)
    _emit_report(args, EvalReport(bestshot=eval_bestshot(preds, anns),
                                  hit_counts=hit_count_by_category(preds, anns)))


def cmd_eval_iou(args):
    anns = formats.load_annotations(args.gt, args.fps)
    preds = formats.load_predictions(args.pred)
    margins = {"Pose": args.pose_margin, "Content": args.margin, "Action": args.margin, "Full": args.margin}
    _emit_report(args, EvalReport(iou=iou_accuracy(preds, anns, _thresholds(args.thresholds), margins)))


def cmd_eval_tal(args):
    gts = formats.load_tal_ground_truth(args.gt, args.fps)
    dets = formats.load_detections(args.pred, args.fps)
    result = tal_map(dets, gts, _thresholds(args.thresholds))
    if result.excluded_classes:
        print(f"warning: {len(result.excluded_classes)} classes without ground truth excluded: "
              f"{', '.join(result.excluded_classes)}", file=sys.stderr)
    _emit_report(args, EvalReport(tal=result))


def cmd_pres3(args):
    frames_dir = Path(args.frames_dir)
    if not frames_dir.is_dir():
        raise InputError(f"{frames_dir} is not a directory")
    frames = sorted(p.name for p in frames_dir.iterdir() if p.is_file())
    try:
        scores = json.loads(Path(args.scores).read_text())
        dynamic, static = scores["dynamic"], scores["static"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"{args.scores}: expected a JSON object with dynamic and static lists ({exc})") from None
    if len(dynamic) != len(frames):
        raise InputError(f"{len(dynamic)} scores for {len(frames)} frames")
    client_cfg = json.loads(Path(args.client).read_text()) if args.client else {"backend": "mock"}
    if client_cfg.get("backend", "mock") == "mock":
        client_cfg.setdefault("seed", args.seed)
    client = client_from_config(client_cfg)
    config = PipelineConfig(budget=args.budget, concurrency=args.concurrency, retries=args.retries,
                            mix_weight=args.mix_weight)
    video = VideoInput(frames_dir.name, frames, np.asarray(dynamic, float), np.asarray(static, float))
    bundle = run_pipeline(client, video, config, load_prompts(args.prompts), args.qa_count)
    _write_lines(args.out, [bundle.to_dict()])


def cmd_mix(args):
    if not args.source:
        raise InputError("mix needs at least one --source NAME:WEIGHT:PATH")
    weights, sources = {}, {}
    for item in args.source:
        parts = item.split(":", 2)
        if len(parts) != 3 or not parts[1].isdigit():
            raise InputError(f"bad --source {item!r}, expected NAME:WEIGHT:PATH")
        name, weight, path = parts
        if name in weights:
            raise InputError(f"source {name!r} given twice")
        weights[name] = int(weight)
        sources[name] = [obj for _, obj in formats.iter_jsonl(path)]
    mixer = DatasetMixer(sources, MixSpec(weights, args.total, args.seed))
    _write_lines(args.out, ({"source": name, "record": rec} for name, rec in mixer))
    print("wraps: " + json.dumps(mixer.wraps), file=sys.stderr)


# ---------------------------------------------------------------- entry point

def _subparser_for(parser, argv):
    """The innermost subparser selected by ``argv`` (or None)."""
    current = parser
    for token in argv:
        actions = [a for a in current._actions if isinstance(a, argparse._SubParsersAction)]
        if not actions:
            break
        if token in actions[0].choices:
            current = actions[0].choices[token]
    return current


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        cfg = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise InputError(f"{known.config}: config must be a JSON object")
    target = _subparser_for(parser, argv)
    dests = {a.dest for a in target._actions}
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in dests or dest in ("config", "help"):
            raise InputError(f"{known.config}: unknown option {key!r} for this command")
        defaults[dest] = value
    target.set_defaults(**defaults)
    # options satisfied by the config file are no longer required on the command line
    for action in target._actions:
        if action.dest in defaults:
            action.required = False


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    except PipelineError as exc:
        print(f"shotkit: pipeline error in step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except (InputError, OSError) as exc:
        print(f"shotkit: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
