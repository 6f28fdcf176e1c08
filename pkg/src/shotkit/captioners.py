"""Caption backends: an abstract client, a deterministic offline mock and a JSON-over-HTTP client.

Every request carries a ``task`` name (``summary``, ``caption`` or ``qa``) and
a small ``meta`` dict with structured context (frame indices, video length)
so a backend can answer without parsing the prompt text.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import urllib.error
import urllib.request
from abc import ABC, abstractmethod

from .errors import InputError

TASKS = ("frame retrieval", "moment retrieval", "dense captioning", "video summary", "temporal reasoning")


class CaptionerError(Exception):
    """Request failed and retrying will not help."""


class TransientError(CaptionerError):
    """Request failed but may succeed when retried."""


class RateLimitError(TransientError):
    def __init__(self, message="rate limited", retry_after=None):
        super().__init__(message)
        self.retry_after = retry_after


class CaptionerClient(ABC):
    """Backend interface; implementations must be safe to call from several threads."""

    @abstractmethod
    def request(self, images, prompt: str, max_tokens: int, task: str = "caption", meta=None) -> str:
        ...


_WORDS = ("person", "walks", "turns", "raises", "arm", "stands", "left", "right", "camera", "slowly",
          "bends", "knee", "looks", "forward", "sits", "jumps", "crowd", "street", "room", "light")


class MockCaptioner(CaptionerClient):
    """Offline stand-in whose replies depend only on the request and the seed.

    ``fail_first`` makes each distinct request raise ``TransientError`` that
    many times before answering. ``fail_images`` lists frame references whose
    caption requests always fail. ``bad_qa`` appends that many QA records with
    out-of-range frames to every QA reply. The in-flight counter records the
    peak number of concurrent requests.
    """

    def __init__(self, seed: int = 0, qa_count: int = 12, fail_first: int = 0, fail_images=(),
                 bad_qa: int = 0, delay: float = 0.0, garbage_qa: bool = False):
        self.seed = seed
        self.qa_count = qa_count
        self.fail_first = fail_first
        self.fail_images = set(fail_images)
        self.bad_qa = bad_qa
        self.delay = delay
        self.garbage_qa = garbage_qa
        self._lock = threading.Lock()
        self._failures = {}
        self.in_flight = 0
        self.max_in_flight = 0
        self.calls = 0

    def _digest(self, *parts) -> bytes:
        return hashlib.blake2b("\x1e".join(str(p) for p in (self.seed, *parts)).encode(), digest_size=32).digest()

    def request(self, images, prompt, max_tokens, task="caption", meta=None):
        key = self._digest(task, list(images), prompt, max_tokens)
        with self._lock:
            self.calls += 1
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
        try:
            if self.delay:
                time.sleep(self.delay)
            with self._lock:
                seen = self._failures.get(key, 0)
                if seen < self.fail_first:
                    self._failures[key] = seen + 1
                    raise TransientError(f"injected failure {seen + 1} of {self.fail_first}")
            if task == "caption" and any(img in self.fail_images for img in images):
                raise TransientError("injected permanent frame failure")
            if task == "qa":
                return self._qa_reply(key, meta or {})
            return self._text(key, max_tokens)
        finally:
            with self._lock:
                self.in_flight -= 1

    def _text(self, key: bytes, max_tokens: int) -> str:
        n = max(1, min(max_tokens, 24))
        words = [_WORDS[b % len(_WORDS)] for b in key[:n]]
        return " ".join(words).capitalize() + "."

    def _qa_reply(self, key: bytes, meta: dict) -> str:
        if self.garbage_qa:
            return "not json: " + key.hex()[:16]
        frames = list(meta.get("frames", [0]))
        length = int(meta.get("video_length", 1))
        records = []
        for i in range(self.qa_count):
            b = self._digest(key.hex(), i)
            task = TASKS[b[0] % len(TASKS)]
            rec = {"task": task, "question": f"Question {i} about the video?", "answer": self._text(b, 8)}
            if task == "frame retrieval":
                rec["frame"] = frames[b[1] % len(frames)]
            elif task in ("moment retrieval", "temporal reasoning"):
                a, c = sorted((frames[b[1] % len(frames)], frames[b[2] % len(frames)]))
                rec["interval"] = [a, c]
            records.append(rec)
        for i in range(self.bad_qa):
            records.append({"task": "frame retrieval", "question": f"Broken question {i}?", "answer": "-",
                            "frame": length + i})
        return json.dumps(records)


class HTTPCaptioner(CaptionerClient):
    """POSTs one JSON body per request and reads ``{"text": ...}`` back.

    Request body: ``{"task", "images", "prompt", "max_tokens", "meta"}``. The
    bearer token is read from the environment variable named by
    ``token_env`` at call time and never stored.
    """

    def __init__(self, endpoint: str, token_env: str = "SHOTKIT_CAPTIONER_TOKEN", timeout: float = 60.0):
        self.endpoint = endpoint
        self.token_env = token_env
        self.timeout = timeout

    def request(self, images, prompt, max_tokens, task="caption", meta=None):
        body = json.dumps({"task": task, "images": [str(i) for i in images], "prompt": prompt,
                           "max_tokens": int(max_tokens), "meta": meta or {}}).encode()
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        req = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode())
        except urllib.error.HTTPError as exc:
            if exc.code == 429:
                retry_after = exc.headers.get("Retry-After") if exc.headers else None
                raise RateLimitError(f"HTTP 429 from {self.endpoint}",
                                     float(retry_after) if retry_after else None) from exc
            if exc.code >= 500:
                raise TransientError(f"HTTP {exc.code} from {self.endpoint}") from exc
            raise CaptionerError(f"HTTP {exc.code} from {self.endpoint}") from exc
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            raise TransientError(f"cannot reach {self.endpoint}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise CaptionerError(f"non-JSON reply from {self.endpoint}") from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
            raise CaptionerError(f"reply from {self.endpoint} lacks a text field")
        return payload["text"]


def client_from_config(cfg: dict) -> CaptionerClient:
    """Build a backend from ``{"backend": "mock"|"http", ...}``."""
    cfg = dict(cfg or {})
    backend = cfg.pop("backend", "mock")
    if backend == "mock":
        factory = MockCaptioner
    elif backend == "http":
        factory = HTTPCaptioner
    else:
        raise InputError(f"unknown captioner backend {backend!r}")
    try:
        return factory(**cfg)
    except TypeError as exc:
        raise InputError(f"bad {backend} captioner options: {exc}") from None
