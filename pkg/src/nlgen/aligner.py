"""Heuristic slot aligner: gazetteer, handcrafted rules and a synonym lexicon."""

from __future__ import annotations

import bisect
import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from nlgen.corpus import (Dataset, MeaningRepresentation, canonical_slot, split_sentences,
                          tokenize)
from nlgen.delex import SENTINEL_VALUES, is_placeholder, parse_placeholder
from nlgen.errors import ConfigError

OBSERVED, RULE, SYNONYM, PLACEHOLDER, MR_VALUE = "observed", "rule", "synonym", "placeholder", "mr"
ANY_VALUE = "*"


def norm_phrase(text: str) -> str:
    return " ".join(tokenize(text).tokens)


def norm_value(value: str) -> str:
    return norm_phrase(value)


@dataclass(frozen=True)
class AlignmentRule:
    slot: str
    kind: str                      # "lexemes" or "pattern"
    value: str | None = None       # None for slot-level rules
    lexemes: tuple[str, ...] = ()
    pattern: str | None = None
    description: str = ""


@dataclass
class RuleSet:
    rules: list[AlignmentRule]
    negators: frozenset[str] = frozenset({"not", "non", "no", "n't"})
    negation_window: int = 3
    boolean_slots: frozenset[str] = frozenset()


def load_rules(path=None) -> RuleSet:
    if path is None:
        raw = resources.files("nlgen.data").joinpath("rules.json").read_text("utf-8")
    else:
        try:
            raw = Path(path).read_text("utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read rule file {path}: {exc}") from exc
    cfg = json.loads(raw)
    rules: list[AlignmentRule] = []
    boolean = set()
    for slot, spec in cfg.get("slots", {}).items():
        slot = canonical_slot(slot)
        desc = spec.get("description", "")
        if spec.get("boolean"):
            boolean.add(slot)
        values = spec.get("values", {})
        for value, lexemes in values.items():
            expanded = []
            for lx in lexemes:
                if lx.startswith("@"):
                    expanded.extend(l for l in values[lx[1:]] if not l.startswith("@"))
                else:
                    expanded.append(lx)
            rules.append(AlignmentRule(slot, "lexemes", norm_value(value), tuple(expanded), None, desc))
        for pat in spec.get("patterns", []):
            re.compile(pat)
            rules.append(AlignmentRule(slot, "pattern", None, (), pat, desc))
    return RuleSet(rules, frozenset(cfg.get("negators", ["not", "non", "no", "n't"])),
                   int(cfg.get("negation_window", 3)), frozenset(boolean))


@dataclass
class SynonymLexicon:
    entries: dict[str, set[tuple[str, str]]] = field(default_factory=dict)

    @classmethod
    def load(cls, path=None) -> SynonymLexicon:
        if path is None:
            text = resources.files("nlgen.data").joinpath("synonyms.tsv").read_text("utf-8")
        else:
            text = Path(path).read_text("utf-8")
        entries: dict[str, set[tuple[str, str]]] = defaultdict(set)
        for n, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            phrase, sep, target = line.partition("\t")
            m = re.fullmatch(r"\s*([^\[]+)\[(.*)\]\s*", target)
            if not sep or not m or not phrase.strip():
                raise ConfigError(f"synonym lexicon line {n}: expected 'phrase<TAB>slot[value]'")
            entries[norm_phrase(phrase)].add((canonical_slot(m.group(1)), norm_value(m.group(2))))
        return cls(dict(entries))


@dataclass(frozen=True)
class Match:
    slot: str
    value: str | None      # normalized value, None for slot-level, ANY_VALUE for placeholders
    sentence: int
    start: int
    end: int
    phrase: str
    source: str

    @property
    def length(self) -> int:
        return self.end - self.start

    @property
    def span(self) -> tuple[int, int, int]:
        return (self.sentence, self.start, self.end)


class Gazetteer:
    """Slot realizations indexed by normalized phrase."""

    def __init__(self, rules: RuleSet | None = None):
        self.realizations: dict[str, set[tuple[str, str]]] = defaultdict(set)
        self.value_realizations: dict[tuple[str, str], set[str]] = defaultdict(set)
        self._index: dict[str, set[tuple[str, str | None, str]]] = defaultdict(set)
        self.patterns: list[tuple[str, re.Pattern, str]] = []
        self.negators = rules.negators if rules else frozenset({"not", "non", "no", "n't"})
        self.negation_window = rules.negation_window if rules else 3
        self.boolean_slots = rules.boolean_slots if rules else frozenset()
        self._max_len = 1

    def add(self, slot: str, phrase: str, source: str, value: str | None = None) -> None:
        phrase = norm_phrase(phrase)
        if not phrase:
            return
        slot = canonical_slot(slot)
        self.realizations[slot].add((phrase, source))
        if value is not None:
            self.value_realizations[(slot, value)].add(phrase)
        self._index[phrase].add((slot, value, source))
        self._max_len = max(self._max_len, len(phrase.split()))

    def add_pattern(self, slot: str, pattern: str, description: str = "") -> None:
        self.patterns.append((canonical_slot(slot), re.compile(r"(?<!\S)(?:" + pattern + r")(?!\S)"),
                              description))

    def slots(self) -> set[str]:
        return set(self.realizations) | {s for s, _, _ in self.patterns}

    def phrases_for(self, slot: str) -> set[str]:
        return {p for p, _ in self.realizations.get(canonical_slot(slot), ())}

    def lookup(self, phrase: str) -> set[tuple[str, str | None, str]]:
        return self._index.get(phrase, set())

    def copy(self) -> Gazetteer:
        g = Gazetteer()
        g.realizations = defaultdict(set, {k: set(v) for k, v in self.realizations.items()})
        g.value_realizations = defaultdict(set, {k: set(v) for k, v in self.value_realizations.items()})
        g._index = defaultdict(set, {k: set(v) for k, v in self._index.items()})
        g.patterns = list(self.patterns)
        g.negators, g.negation_window = self.negators, self.negation_window
        g.boolean_slots, g._max_len = self.boolean_slots, self._max_len
        return g

    def drop_ambiguous_observed(self) -> None:
        """Remove observed bare values that realize more than one slot (e.g. "high")."""
        for phrase, targets in list(self._index.items()):
            if len({slot for slot, _, _ in targets}) < 2:
                continue
            for slot, value, src in list(targets):
                if src == OBSERVED:
                    targets.discard((slot, value, src))
                    self.realizations[slot].discard((phrase, src))
                    if value is not None:
                        self.value_realizations[(slot, value)].discard(phrase)
            if not targets:
                del self._index[phrase]

    def ambiguous(self, phrase: str) -> bool:
        return len({slot for slot, _, _ in self._index.get(phrase, ())}) > 1

    # serialization
    def to_dict(self) -> dict:
        return {
            "version": 1,
            "entries": sorted(([slot, value, phrase, src]
                               for phrase, targets in self._index.items()
                               for slot, value, src in targets), key=json.dumps),
            "patterns": [[slot, pat.pattern, desc] for slot, pat, desc in self.patterns],
            "negators": sorted(self.negators),
            "negation_window": self.negation_window,
            "boolean_slots": sorted(self.boolean_slots),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Gazetteer:
        g = cls(RuleSet([], frozenset(d["negators"]), d["negation_window"],
                        frozenset(d["boolean_slots"])))
        for slot, value, phrase, src in d["entries"]:
            g.add(slot, phrase, src, value)
        for slot, pat, desc in d["patterns"]:
            g.patterns.append((slot, re.compile(pat), desc))
        return g

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False), "utf-8")

    @classmethod
    def load(cls, path) -> Gazetteer:
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))


def _contains(haystack: list[str], needle: list[str]) -> bool:
    n = len(needle)
    return any(haystack[i:i + n] == needle for i in range(len(haystack) - n + 1))


def build_gazetteer(train: Dataset | Iterable | None = None,
                    lexicon: SynonymLexicon | None = None,
                    rules: RuleSet | None = None,
                    delex_slots: Iterable[str] = ()) -> Gazetteer:
    """Assemble a gazetteer from observed values, rules and synonyms.

    A training value is recorded as an observed realization when it occurs
    verbatim in the sample's reference.
    """
    gaz = Gazetteer(rules)
    boolean = gaz.boolean_slots
    if train is not None:
        seen = set()
        for s in train:
            ref_tokens = None
            for sv in s.mr.slots:
                value = norm_value(sv.value)
                if (not value or sv.slot in boolean or value in SENTINEL_VALUES
                        or is_placeholder(value) or (sv.slot, value) in seen):
                    continue
                if ref_tokens is None:
                    ref_tokens = tokenize(s.reference).tokens
                if _contains(ref_tokens, value.split()):
                    seen.add((sv.slot, value))
                    gaz.add(sv.slot, value, OBSERVED, value)
    if rules is not None:
        for rule in rules.rules:
            if rule.kind == "lexemes":
                for lx in rule.lexemes:
                    gaz.add(rule.slot, lx, RULE, rule.value)
            else:
                gaz.add_pattern(rule.slot, rule.pattern, rule.description)
    if lexicon is not None:
        for phrase, targets in lexicon.entries.items():
            for slot, value in targets:
                gaz.add(slot, phrase, SYNONYM, value)
    for slot in delex_slots:
        gaz.add(slot, "slot_" + canonical_slot(slot), PLACEHOLDER, ANY_VALUE)
    gaz.drop_ambiguous_observed()
    return gaz


def default_gazetteer(train=None, delex_slots=("name", "near")) -> Gazetteer:
    return build_gazetteer(train, SynonymLexicon.load(), load_rules(), delex_slots)


@dataclass
class AlignmentReport:
    per_sentence: list[tuple[int, list[str]]]
    unaligned_slots: list[str]
    overgenerated: list[tuple[str, tuple[int, int, int]]]
    total_slots: int
    matches: dict[int, Match] = field(default_factory=dict)   # MR slot index -> best match
    sentences: list[str] = field(default_factory=list)

    @property
    def n_unaligned(self) -> int:
        return len(self.unaligned_slots)

    @property
    def n_overgenerated(self) -> int:
        return len(self.overgenerated)

    @property
    def aligned_slots(self) -> list[str]:
        return [slot for _, slots in self.per_sentence for slot in slots]

    def sentence_of(self, slot: str) -> int | None:
        for idx, slots in self.per_sentence:
            if slot in slots:
                return idx
        return None


def _sentence_candidates(tokens: list[str], sent_idx: int, gaz: Gazetteer,
                         extra: dict[str, set[tuple[str, str | None, str]]]) -> list[Match]:
    out = []
    max_len = max(gaz._max_len, max((len(p.split()) for p in extra), default=1))
    n = len(tokens)
    for i in range(n):
        tok = tokens[i]
        if is_placeholder(tok):
            try:
                ph = parse_placeholder(tok)
                out.append(Match(ph.slot, ANY_VALUE, sent_idx, i, i + 1, tok, PLACEHOLDER))
                continue
            except ValueError:
                pass
        for j in range(i + 1, min(n, i + max_len) + 1):
            phrase = " ".join(tokens[i:j])
            for slot, value, src in gaz.lookup(phrase) | extra.get(phrase, set()):
                if src == PLACEHOLDER:
                    continue
                out.append(Match(slot, value, sent_idx, i, j, phrase, src))
    if gaz.patterns:
        text = " ".join(tokens)
        starts = []
        pos = 0
        for t in tokens:
            starts.append(pos)
            pos += len(t) + 1
        for slot, pat, _ in gaz.patterns:
            for m in pat.finditer(text):
                a = bisect.bisect_left(starts, m.start())
                b = bisect.bisect_left(starts, m.end() + 1)
                if a < b:
                    out.append(Match(slot, None, sent_idx, a, b, m.group(), RULE))
    return out


def _negated(tokens: list[str], start: int, gaz: Gazetteer) -> bool:
    window = tokens[max(0, start - gaz.negation_window):start]
    return any(t in gaz.negators for t in window)


_FLIP = {"yes": "no", "no": "yes", "true": "false", "false": "true"}


def align_utterance(utterance: str, mr: MeaningRepresentation, gaz: Gazetteer) -> AlignmentReport:
    sentences = split_sentences(utterance) or [""]
    mr_values = [(sv.slot, norm_value(sv.value)) for sv in mr.slots]
    mr_slots = {slot for slot, _ in mr_values}

    # The MR's own values are always verbatim realizations, unless another
    # slot shares the phrase (then only context-bearing rule phrases count).
    extra: dict[str, set[tuple[str, str | None, str]]] = defaultdict(set)
    value_owners: dict[str, set[str]] = defaultdict(set)
    for slot, value in mr_values:
        if value and value not in SENTINEL_VALUES and slot not in gaz.boolean_slots:
            value_owners[value].add(slot)
    for value, owners in value_owners.items():
        if len(owners) == 1:
            slot = next(iter(owners))
            others = {s for s, _, _ in gaz.lookup(value)} - {slot}
            if not others:
                extra[value].add((slot, value, MR_VALUE))
    for slot, value in mr_values:
        if not value:
            extra[norm_phrase(slot.replace("_", " "))].add((slot, None, MR_VALUE))

    candidates: list[Match] = []
    sent_tokens = []
    for idx, sent in enumerate(sentences):
        tokens = tokenize(sent).tokens
        sent_tokens.append(tokens)
        for m in _sentence_candidates(tokens, idx, gaz, extra):
            if m.slot in gaz.boolean_slots and m.value in _FLIP and m.source != PLACEHOLDER:
                phrase_negated = any(t in gaz.negators or t.startswith("non-") for t in m.phrase.split())
                if not phrase_negated and _negated(tokens, m.start, gaz):
                    m = Match(m.slot, _FLIP[m.value], m.sentence, m.start, m.end, m.phrase, m.source)
            candidates.append(m)

    def compatible(m: Match, slot: str, value: str) -> bool:
        return m.slot == slot and (m.value is None or m.value == ANY_VALUE or m.value == value
                                   or not value)

    # each MR slot goes to its best compatible match: longest, then earliest
    best: dict[int, Match] = {}
    for k, (slot, value) in enumerate(mr_values):
        for m in candidates:
            if compatible(m, slot, value):
                cur = best.get(k)
                if cur is None or (-m.length, m.sentence, m.start) < (-cur.length, cur.sentence, cur.start):
                    best[k] = m

    per_sentence: dict[int, list[str]] = {i: [] for i in range(len(sentences))}
    unaligned = []
    for k, (slot, value) in enumerate(mr_values):
        if k in best:
            per_sentence[best[k].sentence].append(slot)
        else:
            unaligned.append(slot)

    # Over-generation: spans covered by MR-compatible matches are claimed
    # first; remaining matches are taken longest-first without overlap.
    claimed: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for m in candidates:
        if any(compatible(m, s, v) for s, v in mr_values):
            claimed[m.sentence].append((m.start, m.end))
    over: list[tuple[str, tuple[int, int, int]]] = []
    over_slots = set()
    for m in sorted(candidates, key=lambda m: (-m.length, m.sentence, m.start)):
        spans = claimed[m.sentence]
        if any(not (m.end <= a or m.start >= b) for a, b in spans):
            continue
        spans.append((m.start, m.end))
        if m.slot not in mr_slots and m.slot not in over_slots:
            over_slots.add(m.slot)
            over.append((m.slot, m.span))
    over.sort(key=lambda t: t[1])

    return AlignmentReport(
        per_sentence=[(i, per_sentence[i]) for i in range(len(sentences))],
        unaligned_slots=unaligned,
        overgenerated=over,
        total_slots=len(mr_values),
        matches=best,
        sentences=sentences,
    )


def load_pronouns(path=None) -> tuple[str, ...]:
    if path is None:
        text = resources.files("nlgen.data").joinpath("pronouns.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return tuple(l.strip().lower() for l in text.splitlines() if l.strip() and not l.startswith("#"))


def label_coreference(sentence: str, name_value: str,
                      pronouns: Iterable[str] | None = None) -> bool:
    """True iff the sentence mentions the name (or its placeholder) or a pronoun for it."""
    pronouns = set(pronouns if pronouns is not None else load_pronouns())
    tokens = tokenize(sentence).tokens
    if any(t in pronouns for t in tokens):
        return True
    if any(is_placeholder(t) and parse_placeholder(t).slot == "name" for t in tokens):
        return True
    name = norm_value(name_value).split()
    return bool(name) and _contains(tokens, name)
