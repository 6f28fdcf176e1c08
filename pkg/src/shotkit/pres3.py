"""Summary-first video annotation: keyframes, summary, per-frame captions, QA pairs.

A video is first summarized from a small set of keyframes. Each keyframe is
then captioned on its own with the summary as context (requests run
concurrently up to a limit), and finally one request turns summary plus
captions into question-answer records. Transient backend failures are
retried on a backoff schedule and every attempt is logged.
"""
from __future__ import annotations

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .captioners import TASKS, CaptionerClient, CaptionerError, RateLimitError, TransientError
from .errors import InputError, PipelineError
from .retrieval import Interval, nms_select


@dataclass(frozen=True)
class PipelineConfig:
    budget: int = 10
    concurrency: int = 4
    retries: int = 3
    backoff: tuple = (0.5, 1.0, 2.0, 4.0)
    mix_weight: float = 0.5
    keyframe_radius: int | None = None  # None derives a radius that always yields `budget` picks
    max_tokens: dict = field(default_factory=lambda: {"summary": 256, "caption": 128, "qa": 2048})
    sleep: object = field(default=time.sleep, repr=False, compare=False)

    def __post_init__(self):
        if self.budget < 1 or self.concurrency < 1 or self.retries < 0:
            raise InputError("need budget >= 1, concurrency >= 1 and retries >= 0")
        if not 0.0 <= self.mix_weight <= 1.0:
            raise InputError(f"mix weight must be in [0, 1], got {self.mix_weight}")
        if not self.backoff or any(b < 0 for b in self.backoff):
            raise InputError("backoff schedule must be a non-empty list of non-negative delays")
        if self.keyframe_radius is not None and self.keyframe_radius < 0:
            raise InputError("keyframe radius must be non-negative")

    def delay(self, attempt: int) -> float:
        return self.backoff[min(attempt, len(self.backoff) - 1)]


@dataclass(frozen=True)
class Prompts:
    summary: str
    caption: str
    qa: str
    config_version: str = "custom"


def load_prompts(path=None) -> Prompts:
    if path is None:
        data = json.loads(resources.files("shotkit").joinpath("data/prompts.json").read_text())
    else:
        data = json.loads(Path(path).read_text())
    try:
        return Prompts(data["summary"], data["caption"], data["qa"], data.get("config_version", "custom"))
    except KeyError as exc:
        raise InputError(f"prompt file lacks {exc}") from None


@dataclass(frozen=True)
class QAPair:
    task: str
    question: str
    answer: str
    frame: int | None = None
    interval: Interval | None = None

    def to_dict(self) -> dict:
        out = {"task": self.task, "question": self.question, "answer": self.answer}
        if self.frame is not None:
            out["frame"] = self.frame
        if self.interval is not None:
            out["interval"] = self.interval.to_list()
        return out


@dataclass
class AnnotationBundle:
    video_id: str
    video_length: int
    keyframes: list
    summary: str
    captions: dict  # frame index -> caption
    qas: list
    uncaptioned: list = field(default_factory=list)
    rejected: int = 0
    attempt_log: list = field(default_factory=list)

    def validate(self) -> "AnnotationBundle":
        keys = set(self.keyframes)
        if any(not 0 <= k < self.video_length for k in keys):
            raise PipelineError("keyframe outside the video", step="bundle")
        if not set(self.captions) <= keys:
            raise PipelineError("caption for a frame that was not a keyframe", step="bundle")
        for qa in self.qas:
            if qa.frame is not None and not 0 <= qa.frame < self.video_length:
                raise PipelineError(f"QA frame {qa.frame} outside the video", step="bundle")
            if qa.interval is not None and qa.interval.end >= self.video_length:
                raise PipelineError(f"QA interval {qa.interval.to_list()} outside the video", step="bundle")
        return self

    def to_dict(self) -> dict:
        return {
            "schema": "shotkit.bundle/1",
            "video_id": self.video_id,
            "video_length": self.video_length,
            "keyframes": list(self.keyframes),
            "summary": self.summary,
            "captions": {str(k): v for k, v in sorted(self.captions.items())},
            "qas": [q.to_dict() for q in self.qas],
            "uncaptioned": list(self.uncaptioned),
            "rejected": self.rejected,
            "attempt_log": self.attempt_log,
        }


@dataclass(frozen=True)
class VideoInput:
    video_id: str
    frames: list  # one reference (path or id) per frame
    dynamic_scores: np.ndarray
    static_scores: np.ndarray


def default_keyframe_radius(length: int, budget: int) -> int:
    """Largest radius for which greedy suppression still finds ``budget`` picks."""
    return max(0, (length // budget - 1) // 2)


def sample_keyframes(dynamic_scores, static_scores, budget: int, mix_weight: float = 0.5,
                     radius: int | None = None) -> list:
    """Blend the two score tracks and pick ``budget`` frames by 1-D NMS, sorted ascending.

    If an explicit radius suppresses too much, the remaining slots go to the
    best-scoring unpicked frames.
    """
    d = np.asarray(dynamic_scores, dtype=np.float64)
    s = np.asarray(static_scores, dtype=np.float64)
    if d.shape != s.shape or d.ndim != 1:
        raise InputError(f"score tracks must be 1-D and equal length, got {d.shape} and {s.shape}")
    if not 1 <= budget <= d.size:
        raise InputError(f"budget must be between 1 and {d.size}, got {budget}")
    blend = mix_weight * d + (1.0 - mix_weight) * s
    if radius is None:
        radius = default_keyframe_radius(d.size, budget)
    picks = nms_select(blend, radius, budget)
    if len(picks) < budget:
        taken = set(picks)
        rest = [i for i in np.argsort(-blend, kind="stable") if int(i) not in taken]
        picks += [int(i) for i in rest[: budget - len(picks)]]
    return sorted(picks)


class _Requester:
    """Retry wrapper that appends one log entry per attempt (thread-safe)."""

    def __init__(self, client: CaptionerClient, config: PipelineConfig):
        self.client = client
        self.config = config
        self.log = []
        self._lock = threading.Lock()

    def _record(self, entry):
        with self._lock:
            self.log.append(entry)

    def __call__(self, step, target, images, prompt, meta=None):
        attempts = []
        for attempt in range(self.config.retries + 1):
            entry = {"step": step, "target": target, "attempt": attempt + 1}
            try:
                text = self.client.request(images, prompt, self.config.max_tokens.get(step, 256),
                                           task=step, meta=meta)
            except TransientError as exc:
                entry.update(outcome="transient", error=str(exc))
                attempts.append(entry)
                self._record(entry)
                if attempt == self.config.retries:
                    break
                wait = self.config.delay(attempt)
                if isinstance(exc, RateLimitError) and exc.retry_after is not None:
                    wait = max(wait, exc.retry_after)
                self.config.sleep(wait)
                continue
            except CaptionerError as exc:
                entry.update(outcome="error", error=str(exc))
                attempts.append(entry)
                self._record(entry)
                raise PipelineError(f"{step} request for {target} failed: {exc}", step=step,
                                    attempts=attempts) from exc
            entry.update(outcome="ok")
            attempts.append(entry)
            self._record(entry)
            return text
        raise PipelineError(f"{step} request for {target} failed after {len(attempts)} attempts",
                            step=step, attempts=attempts)


def _requester(client, config):
    return client if isinstance(client, _Requester) else _Requester(client, config or PipelineConfig())


def summarize_video(client, keyframes, frame_refs, config: PipelineConfig | None = None,
                    prompts: Prompts | None = None) -> str:
    """One request with every keyframe image; failure after retries aborts the pipeline."""
    config = config or PipelineConfig()
    prompts = prompts or load_prompts()
    if not 1 <= len(keyframes) <= config.budget:
        raise InputError(f"summary needs between 1 and {config.budget} keyframes, got {len(keyframes)}")
    req = _requester(client, config)
    images = [frame_refs[k] for k in keyframes]
    text = req("summary", "video", images, prompts.summary.format(count=len(images)),
               meta={"frames": list(keyframes), "video_length": len(frame_refs)})
    if not text.strip():
        raise PipelineError("empty summary", step="summary", raw=text)
    return text


def caption_frame(client, summary: str, frame: int, frame_refs, config: PipelineConfig | None = None,
                  prompts: Prompts | None = None) -> str:
    if not summary.strip():
        raise InputError("caption requests need a non-empty summary")
    prompts = prompts or load_prompts()
    req = _requester(client, config)
    return req("caption", frame, [frame_refs[frame]], prompts.caption.format(summary=summary),
               meta={"frames": [frame], "video_length": len(frame_refs)})


def _parse_qa_record(rec, length):
    """QAPair for a well-formed in-range record, else None."""
    if not isinstance(rec, dict) or rec.get("task") not in TASKS:
        return None
    question, answer = rec.get("question"), rec.get("answer")
    if not isinstance(question, str) or not isinstance(answer, str):
        return None
    frame = rec.get("frame")
    interval = rec.get("interval")
    if frame is not None:
        if not isinstance(frame, int) or isinstance(frame, bool) or not 0 <= frame < length:
            return None
    if interval is not None:
        if (not isinstance(interval, list) or len(interval) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in interval)):
            return None
        if not 0 <= interval[0] <= interval[1] < length:
            return None
        interval = Interval(*interval)
    return QAPair(rec["task"], question, answer, frame, interval)


def generate_qas(client, summary: str, captions: dict, video_length: int,
                 config: PipelineConfig | None = None, prompts: Prompts | None = None, count: int = 12):
    """One request over summary and captions; returns ``(qa_pairs, rejected_count)``.

    Records with unknown tasks, missing fields or out-of-range answers are
    rejected and counted. A reply that is not a JSON list raises
    ``PipelineError`` with the raw text attached.
    """
    if not captions:
        raise InputError("QA generation needs at least one caption")
    prompts = prompts or load_prompts()
    req = _requester(client, config)
    lines = "\n".join(f"{k}: {v}" for k, v in sorted(captions.items()))
    prompt = prompts.qa.format(summary=summary, captions=lines, length=video_length, count=count,
                               tasks=", ".join(TASKS))
    raw = req("qa", "video", [], prompt, meta={"frames": sorted(captions), "video_length": video_length})
    try:
        records = json.loads(raw)
    except json.JSONDecodeError:
        records = None
    if not isinstance(records, list):
        raise PipelineError("QA reply is not a JSON list", step="qa", raw=raw)
    qas = []
    rejected = 0
    for rec in records:
        qa = _parse_qa_record(rec, video_length)
        if qa is None:
            rejected += 1
        else:
            qas.append(qa)
    return qas, rejected


def run_pipeline(client: CaptionerClient, video: VideoInput, config: PipelineConfig | None = None,
                 prompts: Prompts | None = None, qa_count: int = 12) -> AnnotationBundle:
    """Keyframes -> summary -> concurrent captions -> QA, returning a validated bundle.

    A frame whose caption fails after retries is listed as uncaptioned; a
    failed summary or QA step raises ``PipelineError`` naming the step.
    """
    config = config or PipelineConfig()
    prompts = prompts or load_prompts()
    length = len(video.frames)
    if length == 0:
        raise InputError(f"video {video.video_id!r} has no frames")
    keyframes = sample_keyframes(video.dynamic_scores, video.static_scores, min(config.budget, length),
                                 config.mix_weight, config.keyframe_radius)
    req = _Requester(client, config)
    summary = summarize_video(req, keyframes, video.frames, config, prompts)

    def work(frame):
        try:
            return frame, caption_frame(req, summary, frame, video.frames, config, prompts)
        except PipelineError:
            return frame, None

    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        results = list(pool.map(work, keyframes))
    captions = {f: text for f, text in results if text is not None}
    uncaptioned = [f for f, text in results if text is None]
    if not captions:
        raise PipelineError("every caption request failed", step="caption", attempts=req.log)
    qas, rejected = generate_qas(req, summary, captions, length, config, prompts, qa_count)
    # worker threads append in completion order; sort for a reproducible log
    log = sorted(req.log, key=lambda e: (["summary", "caption", "qa"].index(e["step"]),
                                         str(e["target"]).zfill(12), e["attempt"]))
    bundle = AnnotationBundle(video.video_id, length, keyframes, summary, captions, qas,
                              uncaptioned, rejected, log)
    return bundle.validate()
