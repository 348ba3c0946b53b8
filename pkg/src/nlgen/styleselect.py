"""Discourse-cue profiling and stylistic selection of training references.

Cues are found with declarative lexical/positional rules over lowercase
tokens; no parser is involved.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from nlgen.corpus import Dataset, load_abbreviations, tokenize
from nlgen.delex import is_placeholder
from nlgen.errors import ConfigError

CUE_TYPES = ("contrastive", "subordinate", "aggregation", "apposition")
_TERMINALS = {".", "!", "?"}


@dataclass(frozen=True)
class DiscourseProfile:
    contrastive_cues: int = 0
    subordinate_markers: int = 0
    aggregation_markers: int = 0
    apposition_markers: int = 0
    sentence_count: int = 1
    token_count: int = 0

    def count(self, cue: str) -> int:
        return {
            "contrastive": self.contrastive_cues,
            "subordinate": self.subordinate_markers,
            "aggregation": self.aggregation_markers,
            "apposition": self.apposition_markers,
        }[cue]


@dataclass(frozen=True)
class SelectionPolicy:
    weights: dict = field(default_factory=lambda: {
        "contrastive": 2.0, "apposition": 2.0, "subordinate": 1.5, "aggregation": 1.0})
    sentence_penalty: float = 1.0
    mode: str = "top_per_mr"
    top_n: float = 4
    threshold: float = 0.0

    def __post_init__(self):
        if self.sentence_penalty < 0:
            raise ConfigError("sentence_penalty must be >= 0")
        if not any(w > 0 for w in self.weights.values()):
            raise ConfigError("at least one cue weight must be positive")
        if set(self.weights) - set(CUE_TYPES):
            raise ConfigError(f"unknown cue types {sorted(set(self.weights) - set(CUE_TYPES))}")
        if self.mode not in ("top_per_mr", "threshold"):
            raise ConfigError(f"unknown selection mode {self.mode!r}")
        if self.mode == "top_per_mr" and not self.top_n >= 1:
            raise ConfigError("top_n must be >= 1")


@lru_cache(maxsize=None)
def load_cues(path=None) -> dict:
    if path is None:
        raw = resources.files("nlgen.data").joinpath("discourse_cues.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    cfg = json.loads(raw)
    return {k: (frozenset(v) if isinstance(v, list) else v) for k, v in cfg.items()}


def _sentence_count(tokens: list[str], abbreviations) -> int:
    count = 1
    for i, tok in enumerate(tokens[:-1]):
        if tok in _TERMINALS and tokens[i + 1] not in _TERMINALS:
            if tok == "." and i > 0 and tokens[i - 1] + "." in abbreviations:
                continue
            count += 1
    return count


def profile_utterance(utterance: str, cues: dict | None = None) -> DiscourseProfile:
    cues = cues if cues is not None else load_cues()
    tokens = tokenize(utterance).tokens
    n = len(tokens)

    contrastive = sum(1 for t in tokens if t in cues["contrastive"])

    subordinate = sum(1 for t in tokens if t in cues["subordinators"])
    for i, t in enumerate(tokens):
        if t == "that" and ((i > 0 and tokens[i - 1] == ",") or
                            (i + 1 < n and tokens[i + 1] in cues["that_followers"])):
            subordinate += 1

    aggregation = 0
    for i, t in enumerate(tokens[:-1]):
        if t == "and" and tokens[i + 1] in cues["aggregation_verbs"]:
            aggregation += 1
        elif t == "as" and tokens[i + 1:i + 3] == ["well", "as"]:
            aggregation += 1

    apposition = 0
    max_len = int(cues["apposition_max_tokens"])
    for i, t in enumerate(tokens):
        if t != ",":
            continue
        j = i + 1
        while j < n and tokens[j] != "," and tokens[j] not in _TERMINALS:
            j += 1
        segment = tokens[i + 1:j]
        if not segment:
            continue
        if segment[0] in cues["apposition_triggers"]:
            apposition += 1
        elif len(segment) <= max_len and any(is_placeholder(s) for s in segment):
            apposition += 1

    return DiscourseProfile(
        contrastive_cues=contrastive,
        subordinate_markers=subordinate,
        aggregation_markers=aggregation,
        apposition_markers=apposition,
        sentence_count=_sentence_count(tokens, _abbreviations()) if tokens else 1,
        token_count=n,
    )


@lru_cache(maxsize=1)
def _abbreviations():
    return load_abbreviations()


def complexity_score(profile: DiscourseProfile, policy: SelectionPolicy = SelectionPolicy()) -> float:
    score = sum(w * profile.count(cue) for cue, w in policy.weights.items())
    return score - policy.sentence_penalty * (profile.sentence_count - 1)


def select_references(dataset: Dataset, policy: SelectionPolicy = SelectionPolicy()) -> Dataset:
    """Keep the most elaborate references per MR; every MR keeps at least one."""
    if policy.mode == "top_per_mr" and math.isinf(policy.top_n):
        return dataset
    groups: dict[str, list[int]] = defaultdict(list)
    for i, s in enumerate(dataset):
        groups[s.mr.key() + "|" + s.mr.da_type].append(i)
    keep: set[int] = set()
    for idxs in groups.values():
        ranked = []
        for i in idxs:
            prof = profile_utterance(dataset[i].reference)
            ranked.append((-complexity_score(prof, policy), prof.sentence_count,
                           prof.token_count, i))
        ranked.sort()
        if policy.mode == "top_per_mr":
            keep.update(r[3] for r in ranked[:int(policy.top_n)])
        else:
            chosen = [r[3] for r in ranked if -r[0] >= policy.threshold]
            keep.update(chosen or [ranked[0][3]])
    return dataset.replace([s for i, s in enumerate(dataset) if i in keep])
