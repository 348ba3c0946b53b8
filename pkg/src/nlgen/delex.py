"""Delexicalization with featureful placeholder tokens, and relexicalization."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from nlgen.corpus import Dataset, MeaningRepresentation, Sample, SlotValue, canonical_slot
from nlgen.errors import ConfigError, NotDelexicalizable

PREFIX = "slot"
VOWEL, CONSONANT, CUISINE, PLURAL = "vow", "con", "cuisine", "plu"
SENTINEL_VALUES = frozenset({"", "dontcare", "dont_care", "none", "?"})
PLACEHOLDER_RE = re.compile(r"(?<![\w-])slot_[a-z0-9_]+", re.IGNORECASE)


def load_cuisines(path=None) -> frozenset[str]:
    if path is None:
        text = resources.files("nlgen.data").joinpath("cuisines.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(l.strip().lower() for l in text.splitlines()
                     if l.strip() and not l.startswith("#"))


@dataclass(frozen=True)
class DelexPolicy:
    delex_slots: frozenset[str]
    excluded_slots: frozenset[str] = frozenset()
    cuisine_lexicon: frozenset[str] = frozenset()
    article_feature_enabled: bool = True
    # slots whose placeholders carry vowel/cuisine (and optionally plural) features
    article_slots: frozenset[str] = frozenset({"food"})
    plural_slots: frozenset[str] = frozenset()

    def __post_init__(self):
        for name in ("delex_slots", "excluded_slots", "article_slots", "plural_slots"):
            object.__setattr__(self, name, frozenset(canonical_slot(s) for s in getattr(self, name)))
        object.__setattr__(self, "cuisine_lexicon", frozenset(c.lower() for c in self.cuisine_lexicon))
        overlap = self.delex_slots & self.excluded_slots
        if overlap:
            raise ConfigError(f"slots both delexicalized and excluded: {sorted(overlap)}")

    @classmethod
    def default(cls, domain: str = "e2e") -> DelexPolicy:
        if domain in ("e2e", "synthetic"):
            return cls(
                delex_slots=frozenset({"name", "near"}),
                excluded_slots=frozenset({"pricerange", "area", "customer_rating",
                                          "familyfriendly", "eattype"}),
                cuisine_lexicon=load_cuisines(),
            )
        if domain in ("tv", "laptop"):
            return cls(
                delex_slots=frozenset({"name", "screensize", "processor", "price", "family"}),
                excluded_slots=frozenset({"pricerange", "type", "isforbusinesscomputing",
                                          "hasusbport", "ecorating", "batteryrating",
                                          "driverange", "weightrange"}),
                cuisine_lexicon=frozenset(),
                article_slots=frozenset({"accessories"}),
                plural_slots=frozenset({"accessories"}),
            )
        raise ConfigError(f"no default delex policy for domain {domain!r}")

    @classmethod
    def from_file(cls, path) -> DelexPolicy:
        path = Path(path)
        try:
            cfg = json.loads(path.read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read delex policy {path}: {exc}") from exc
        known = {"delex_slots", "excluded_slots", "cuisine_lexicon", "article_feature_enabled",
                 "article_slots", "plural_slots", "version"}
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown delex policy keys: {sorted(unknown)}")
        lex = cfg.get("cuisine_lexicon")
        if lex is None:
            cuisines = load_cuisines()
        elif isinstance(lex, list):
            cuisines = frozenset(lex)
        else:
            cuisines = load_cuisines(path.parent / lex)
        return cls(
            delex_slots=frozenset(cfg.get("delex_slots", [])),
            excluded_slots=frozenset(cfg.get("excluded_slots", [])),
            cuisine_lexicon=cuisines,
            article_feature_enabled=cfg.get("article_feature_enabled", True),
            article_slots=frozenset(cfg.get("article_slots", ["food"])),
            plural_slots=frozenset(cfg.get("plural_slots", [])),
        )

    def to_dict(self) -> dict:
        return {
            "delex_slots": sorted(self.delex_slots),
            "excluded_slots": sorted(self.excluded_slots),
            "cuisine_lexicon": sorted(self.cuisine_lexicon),
            "article_feature_enabled": self.article_feature_enabled,
            "article_slots": sorted(self.article_slots),
            "plural_slots": sorted(self.plural_slots),
        }


@dataclass(frozen=True)
class PlaceholderToken:
    slot: str
    vowel_feature: bool | None = None
    cuisine_feature: bool = False
    plural_feature: bool = False

    @property
    def surface(self) -> str:
        parts = [PREFIX]
        if self.vowel_feature is not None:
            parts.append(VOWEL if self.vowel_feature else CONSONANT)
        if self.cuisine_feature:
            parts.append(CUISINE)
        if self.plural_feature:
            parts.append(PLURAL)
        parts.append(self.slot)
        return "_".join(parts)

    def __str__(self) -> str:
        return self.surface


def parse_placeholder(surface: str) -> PlaceholderToken:
    """Inverse of PlaceholderToken.surface; raises ValueError on non-placeholders."""
    s = surface.lower()
    if not s.startswith(PREFIX + "_"):
        raise ValueError(f"not a placeholder: {surface!r}")
    rest = s[len(PREFIX) + 1:]
    vowel = None
    for tag, flag in ((VOWEL, True), (CONSONANT, False)):
        if rest.startswith(tag + "_"):
            vowel, rest = flag, rest[len(tag) + 1:]
            break
    cuisine = rest.startswith(CUISINE + "_")
    if cuisine:
        rest = rest[len(CUISINE) + 1:]
    plural = rest.startswith(PLURAL + "_")
    if plural:
        rest = rest[len(PLURAL) + 1:]
    if not rest:
        raise ValueError(f"placeholder without slot name: {surface!r}")
    return PlaceholderToken(rest, vowel, cuisine, plural)


def is_placeholder(token: str) -> bool:
    return token.lower().startswith(PREFIX + "_") and len(token) > len(PREFIX) + 1


def placeholder_for(slot: str, value: str, policy: DelexPolicy) -> PlaceholderToken:
    slot = canonical_slot(slot)
    if slot in policy.excluded_slots or slot not in policy.delex_slots:
        raise NotDelexicalizable(f"slot {slot!r} is not delexicalized under this policy")
    if not (policy.article_feature_enabled and slot in policy.article_slots):
        return PlaceholderToken(slot)
    first = next((c for c in value.lower() if c.isalpha()), "")
    vowel = first in "aeiou" if first else False
    cuisine = value.strip().lower() in policy.cuisine_lexicon
    plural = slot in policy.plural_slots and value.strip().lower().endswith("s")
    return PlaceholderToken(slot, vowel, cuisine, plural)


@dataclass(frozen=True)
class Substitution:
    slot: str
    value: str
    placeholder: str
    # span into the original utterance; None when the value was not found
    span: tuple[int, int] | None


@dataclass(frozen=True)
class DelexSample:
    delex_mr: MeaningRepresentation
    delex_utterance: str
    substitutions: tuple[Substitution, ...] = field(default_factory=tuple)
    source: Sample | None = None

    @property
    def unsubstituted(self) -> list[str]:
        return [s.slot for s in self.substitutions if s.span is None]


def _delexicalizable(sv: SlotValue, policy: DelexPolicy) -> bool:
    return sv.slot in policy.delex_slots and sv.value.strip().lower() not in SENTINEL_VALUES


def delexicalize_mr(mr: MeaningRepresentation, policy: DelexPolicy) -> MeaningRepresentation:
    slots = []
    for sv in mr.slots:
        if _delexicalizable(sv, policy):
            slots.append(SlotValue(sv.slot, placeholder_for(sv.slot, sv.value, policy).surface))
        else:
            slots.append(sv)
    return mr.with_slots(slots)


def _value_pattern(value: str) -> re.Pattern:
    return re.compile(r"(?<![\w-])" + re.escape(value.strip()) + r"(?![\w-])", re.IGNORECASE)


def delexicalize(sample: Sample, policy: DelexPolicy) -> DelexSample:
    text = sample.reference
    spans = []  # (start, end, slot, value, placeholder)
    placeholders = {}
    for sv in sample.mr.slots:
        if not _delexicalizable(sv, policy):
            continue
        ph = placeholder_for(sv.slot, sv.value, policy).surface
        placeholders[sv.slot] = (sv.value, ph)
        for m in _value_pattern(sv.value).finditer(text):
            spans.append((m.start(), m.end(), sv.slot, sv.value, ph))

    # longest first, then leftmost
    spans.sort(key=lambda t: (-(t[1] - t[0]), t[0]))
    taken: list[tuple[int, int, str, str, str]] = []
    for sp in spans:
        if all(sp[1] <= t[0] or sp[0] >= t[1] for t in taken):
            taken.append(sp)
    taken.sort()

    out, pos = [], 0
    for start, end, _, _, ph in taken:
        out.append(text[pos:start])
        out.append(ph)
        pos = end
    out.append(text[pos:])

    subs = [Substitution(slot, value, ph, (start, end)) for start, end, slot, value, ph in taken]
    found = {s.slot for s in subs}
    subs += [Substitution(slot, value, ph, None)
             for slot, (value, ph) in placeholders.items() if slot not in found]
    return DelexSample(delexicalize_mr(sample.mr, policy), "".join(out), tuple(subs), sample)


def relexicalize(text: str, mr: MeaningRepresentation,
                 policy: DelexPolicy | None = None) -> tuple[str, list[str]]:
    """Replace placeholders by the MR's values.

    Returns the restored text and the placeholders whose slot the MR lacks;
    those are left in place.
    """
    orphans: list[str] = []

    def sub(m: re.Match) -> str:
        surface = m.group()
        try:
            token = parse_placeholder(surface)
        except ValueError:
            orphans.append(surface)
            return surface
        value = mr.get(token.slot)
        if value is None or is_placeholder(value):
            orphans.append(surface)
            return surface
        return value

    return PLACEHOLDER_RE.sub(sub, text), orphans


def infer_delex_slots(dataset: Dataset, threshold: float = 0.98,
                      excluded=frozenset()) -> frozenset[str]:
    """Slots whose value occurs verbatim in at least `threshold` of their references."""
    hits: Counter = Counter()
    seen: Counter = Counter()
    excluded = {canonical_slot(s) for s in excluded}
    for s in dataset:
        for sv in s.mr.slots:
            if sv.slot in excluded or sv.value.strip().lower() in SENTINEL_VALUES:
                continue
            seen[sv.slot] += 1
            if _value_pattern(sv.value).search(s.reference):
                hits[sv.slot] += 1
    return frozenset(slot for slot, n in seen.items() if hits[slot] / n >= threshold)
