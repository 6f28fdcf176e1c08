"""Ratio-exact interleaving of several record sources.

A seeded slot pattern of length ``sum(weights)`` holding each source exactly
``weight`` times is repeated for the whole stream. Since the stream is
periodic, every run of ``sum(weights)`` consecutive items (not only aligned
blocks) contains each source exactly ``weight`` times. Within a source,
records come in a seeded random order; an exhausted source is reshuffled and
its wrap counter incremented.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class MixSpec:
    weights: dict  # source name -> integer ratio weight
    total: int
    seed: int = 0

    def __post_init__(self):
        if not self.weights:
            raise InputError("mix needs at least one source")
        for name, w in self.weights.items():
            if isinstance(w, bool) or not isinstance(w, (int, np.integer)) or w < 1:
                raise InputError(f"weight of source {name!r} must be an integer >= 1, got {w!r}")
        if self.total < 0:
            raise InputError("total must be non-negative")

    @property
    def window(self) -> int:
        return int(sum(self.weights.values()))


class DatasetMixer:
    """Iterator over ``(source name, record)`` pairs following a :class:`MixSpec`."""

    def __init__(self, sources: dict, spec: MixSpec):
        for name in spec.weights:
            if name not in sources:
                raise InputError(f"no records given for source {name!r}")
            if len(sources[name]) == 0:
                raise InputError(f"source {name!r} is empty")
        self.sources = {name: list(sources[name]) for name in spec.weights}
        self.spec = spec
        self._rng = np.random.default_rng(spec.seed)
        names = [name for name, w in spec.weights.items() for _ in range(int(w))]
        self.pattern = [names[i] for i in self._rng.permutation(len(names))]
        self.wraps = {name: 0 for name in spec.weights}
        self._order = {name: self._rng.permutation(len(recs)) for name, recs in self.sources.items()}
        self._cursor = {name: 0 for name in spec.weights}
        self._emitted = 0

    def __iter__(self):
        return self

    def __next__(self):
        if self._emitted >= self.spec.total:
            raise StopIteration
        name = self.pattern[self._emitted % len(self.pattern)]
        self._emitted += 1
        if self._cursor[name] == len(self.sources[name]):
            self.wraps[name] += 1
            self._order[name] = self._rng.permutation(len(self.sources[name]))
            self._cursor[name] = 0
        record = self.sources[name][self._order[name][self._cursor[name]]]
        self._cursor[name] += 1
        return name, record


def mix_datasets(sources: dict, spec: MixSpec):
    """Materialize a mixed stream; returns ``(items, wraps)``."""
    mixer = DatasetMixer(sources, spec)
    items = list(mixer)
    return items, dict(mixer.wraps)
