"""Turn categorized posecodes into short natural-language pose descriptions.

The pipeline is extract -> aggregate -> realize. Aggregation merges
left/right counterparts that agree ("both arms are straight") and drops
uninformative categories; realization fills sentence templates, picking a
variant per statement from a seeded hash so output is reproducible.

Statement order and variant draws depend only on a left/right-symmetric key
of each statement, which keeps descriptions consistent under mirroring:
describing a mirrored pose gives the original text with "left" and "right"
swapped.
"""
from __future__ import annotations

import hashlib
import json
import re
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InputError
from .posecode import (
    INDETERMINATE,
    BinConfig,
    CategorizedPosecode,
    Roster,
    body_orientation_code,
    extract_all,
)

ORDER_POLICIES = ("fixed-roster", "seeded-shuffle")
_SIDE_WORDS = re.compile(r"\b(left|right|Left|Right)\b")
_SWAP = {"left": "right", "right": "left", "Left": "Right", "Right": "Left"}


def swap_left_right(text: str) -> str:
    """Exchange the words left and right (case preserved, whole words only)."""
    return _SIDE_WORDS.sub(lambda m: _SWAP[m.group(1)], text)


@dataclass(frozen=True)
class AggregatedStatement:
    subject: str
    category: str
    codes: tuple
    object: str | None = None
    template: str = "state"
    plural: bool = False
    position: int = 0
    pinned: bool = False

    def __post_init__(self):
        if not self.subject:
            raise InputError("statement subject must be non-empty")
        if not self.codes:
            raise InputError("a statement needs at least one posecode")

    @property
    def arity(self) -> str:
        return "plural" if self.plural else "single"

    def signature(self) -> str:
        return "\x1f".join([self.template, self.arity, self.subject, self.category, self.object or ""])

    def symmetric_key(self) -> str:
        """Signature that is identical for a statement and its mirror image."""
        sig = self.signature()
        return min(sig, swap_left_right(sig))


@dataclass(frozen=True)
class Template:
    name: str
    slots: tuple
    single: tuple
    plural: tuple

    def __post_init__(self):
        for arity in ("single", "plural"):
            variants = getattr(self, arity)
            if not variants:
                raise InputError(f"template {self.name!r} has no {arity} variants")
            for pattern in variants:
                fields = [f for _, f, _, _ in string.Formatter().parse(pattern) if f is not None]
                if sorted(fields) != sorted(self.slots):
                    raise InputError(
                        f"template {self.name!r} variant {pattern!r} must use each of {list(self.slots)} exactly once"
                    )

    def variants(self, arity: str) -> tuple:
        return self.single if arity == "single" else self.plural


@dataclass(frozen=True)
class TemplateSet:
    templates: dict
    config_version: str = "custom"

    def get(self, name: str, category: str) -> Template:
        try:
            return self.templates[name]
        except KeyError:
            raise InputError(f"no template {name!r} for category {category!r}") from None


def load_templates(path=None) -> TemplateSet:
    if path is None:
        data = json.loads(resources.files("shotkit").joinpath("data/templates.json").read_text())
    else:
        data = json.loads(Path(path).read_text())
    try:
        templates = {
            name: Template(name, tuple(t["slots"]), tuple(t["single"]), tuple(t["plural"]))
            for name, t in data["templates"].items()
        }
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed template file: {exc}") from exc
    return TemplateSet(templates, data.get("config_version", "custom"))


@dataclass(frozen=True)
class DescriberConfig:
    seed: int = 0
    max_sentences: int = 10
    skip_skippable: bool = True
    order: str = "fixed-roster"

    def __post_init__(self):
        if self.max_sentences < 1:
            raise InputError("max_sentences must be at least 1")
        if self.order not in ORDER_POLICIES:
            raise InputError(f"order must be one of {ORDER_POLICIES}, got {self.order!r}")


@dataclass(frozen=True)
class PoseDescription:
    sentences: tuple
    statements: tuple
    config_version: str
    seed: int
    codes: tuple = field(default=(), repr=False)

    @property
    def text(self) -> str:
        return " ".join(self.sentences)


def _stable_hash(*parts) -> int:
    digest = hashlib.blake2b("\x1e".join(str(p) for p in parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def aggregate(codes, roster: Roster, bins: BinConfig, skip_skippable: bool = True) -> list:
    """Group posecodes of one pose into statements.

    Mirror-image entries with matching categories (opposite categories for
    lateral relations) collapse into one plural "both ..." statement. With
    ``skip_skippable`` statements in uninformative categories are dropped.
    Output is ordered by roster position, then by a mirror-symmetric key.
    """
    by_entry = {c.entry: c for c in codes if c.entry is not None}
    if len(by_entry) != len(codes):
        raise InputError("aggregate needs posecodes produced by extract_all (with roster positions)")
    used = set()
    statements = []
    for i, code in sorted(by_entry.items()):
        if i in used:
            continue
        entry = roster.entries[i]
        spec = bins[entry.bins]
        partner = roster.mirror[i]
        other = by_entry.get(partner)
        flips = roster.kinds[i].mirror_flips
        mergeable = (
            other is not None
            and partner != i
            and not roster.mirror_reversed[i]
            and entry.subject_plural is not None
            and other.label == (spec.opposite(code.label) if flips else code.label)
        )
        if mergeable:
            used.update((i, partner))
            left_code = code if roster.side[i] != "right" else other
            category = spec.merged.get(left_code.label, left_code.label) if flips else code.label
            skippable = left_code.skippable
            statement = AggregatedStatement(
                subject=entry.subject_plural,
                category=category,
                codes=(code, other) if i < partner else (other, code),
                object=entry.object_plural or entry.object,
                template=spec.template,
                plural=True,
                position=min(i, partner),
            )
        else:
            used.add(i)
            skippable = code.skippable
            statement = AggregatedStatement(
                subject=entry.subject,
                category=code.label,
                codes=(code,),
                object=entry.object,
                template=spec.template,
                plural=entry.plural,
                position=min(i, partner) if partner >= 0 else i,
            )
        if skip_skippable and skippable:
            continue
        statements.append(statement)
    statements.sort(key=lambda s: (s.position, s.symmetric_key()))
    return statements


def realize(statements, templates: TemplateSet, config: DescriberConfig, config_version: str = "custom",
            codes=()) -> PoseDescription:
    """Render statements into sentences, at most ``config.max_sentences`` of them.

    Pinned statements stay in front; ``seeded-shuffle`` reorders the rest by a
    seeded hash of their symmetric key.
    """
    statements = list(statements)
    if config.order == "seeded-shuffle":
        pinned = [s for s in statements if s.pinned]
        rest = [s for s in statements if not s.pinned]
        rest.sort(key=lambda s: (_stable_hash(config.seed, "order", s.symmetric_key()), s.symmetric_key()))
        statements = pinned + rest
    statements = statements[: config.max_sentences]
    sentences = []
    for s in statements:
        template = templates.get(s.template, s.category)
        variants = template.variants(s.arity)
        pattern = variants[_stable_hash(config.seed, s.symmetric_key()) % len(variants)]
        slots = {"subject": s.subject, "category": s.category}
        if "object" in template.slots:
            if s.object is None:
                raise InputError(f"template {template.name!r} needs an object for category {s.category!r}")
            slots["object"] = s.object
        text = pattern.format(**slots)
        sentences.append(text[:1].upper() + text[1:])
    return PoseDescription(tuple(sentences), tuple(statements), config_version, config.seed, tuple(codes))


def orientation_statement(pose, skeleton, bins: BinConfig):
    code = body_orientation_code(pose, skeleton, bins)
    if code.label == INDETERMINATE:
        return None
    return AggregatedStatement(
        subject="the person", category=code.label, codes=(code,),
        template=bins["orientation"].template, position=-1, pinned=True,
    )


def describe(pose, skeleton, bin_config: BinConfig, roster: Roster, templates: TemplateSet,
             config: DescriberConfig | None = None) -> PoseDescription:
    """Full description of one pose; the body orientation always comes first when defined."""
    config = config or DescriberConfig()
    rng = np.random.default_rng(config.seed) if bin_config.jitter > 0.0 else None
    codes = extract_all(pose, skeleton, bin_config, roster, rng=rng)
    statements = aggregate(codes, roster, bin_config, config.skip_skippable)
    head = orientation_statement(pose, skeleton, bin_config)
    if head is not None:
        statements.insert(0, head)
        codes = [head.codes[0], *codes]
    version = f"{bin_config.config_version}+{roster.config_version}+{templates.config_version}"
    return realize(statements, templates, config, version, codes)


@dataclass
class Describer:
    """Bundles skeleton and configs for repeated use (e.g. over a pose file)."""

    skeleton: object
    bins: BinConfig
    roster: Roster
    templates: TemplateSet
    config: DescriberConfig = field(default_factory=DescriberConfig)

    @classmethod
    def default(cls, config: DescriberConfig | None = None, skeleton=None) -> "Describer":
        from .kinematics import load_skeleton
        from .posecode import load_bin_config, load_roster

        skeleton = skeleton or load_skeleton()
        return cls(skeleton, load_bin_config(), load_roster(skeleton), load_templates(),
                   config or DescriberConfig())

    def __call__(self, pose) -> PoseDescription:
        return describe(pose, self.skeleton, self.bins, self.roster, self.templates, self.config)


def mirror_statement_codes(codes, roster: Roster, bins: BinConfig) -> list:
    """Expected posecodes of the mirrored pose, derived from the original's codes.

    Entry ``i`` of the mirrored pose measures what entry ``roster.mirror[i]``
    measured on the original, with the value negated for lateral relations and
    for reversed joint order on relative kinds. Used to check mirror symmetry.
    """
    by_entry = {c.entry: c for c in codes}
    out = []
    for i in range(len(roster)):
        j = roster.mirror[i]
        if j < 0:
            raise InputError(f"roster entry {i} has no mirror counterpart")
        src = by_entry[j]
        sign = -1.0 if roster.kinds[i].mirror_flips else 1.0
        if roster.mirror_reversed[i]:
            sign = -sign
        spec = bins[roster.entries[i].bins]
        label = src.label if sign > 0 else spec.opposite(src.label)
        out.append(CategorizedPosecode(roster.kinds[i], label, sign * src.value, label in spec.skippable, i))
    return out
