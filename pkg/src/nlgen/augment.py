"""Training-set expansion: utterance/MR splitting and slot permutation."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from nlgen.aligner import AlignmentReport, Gazetteer, align_utterance, label_coreference
from nlgen.corpus import Dataset, Sample, SlotValue
from nlgen.errors import ConfigError

OUTER, INNER = "outer", "inner"


@dataclass(frozen=True)
class SplitConfig:
    pronouns: tuple[str, ...] = ("it", "its", "they", "their")
    position_slot_name: str = "position"
    keep_unalignable: bool = True

    def __post_init__(self):
        if not self.pronouns:
            raise ConfigError("pronoun list must be non-empty")


@dataclass(frozen=True)
class PermutationConfig:
    k: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.k < 0:
            raise ConfigError("k must be >= 0")


def split_sample(sample: Sample, gaz: Gazetteer, cfg: SplitConfig = SplitConfig(),
                 report: AlignmentReport | None = None) -> list[Sample]:
    """One sub-sample per sentence, holding the slots aligned to that sentence.

    The name slot is added whenever the sentence mentions the name or refers
    to it with a pronoun; a position slot marks the first sentence as outer.
    """
    mr = sample.mr
    if report is None:
        report = align_utterance(sample.reference, mr, gaz)
    name_value = mr.get("name")
    out = []
    for idx, sentence in enumerate(report.sentences):
        aligned = set(report.per_sentence[idx][1])
        if name_value is not None and "name" not in aligned:
            if label_coreference(sentence, name_value, cfg.pronouns):
                aligned.add("name")
        if not aligned:
            continue
        slots = [sv for sv in mr.slots if sv.slot in aligned]
        slots.append(SlotValue(cfg.position_slot_name, OUTER if idx == 0 else INNER))
        out.append(Sample(mr.with_slots(slots), sentence, f"{sample.id}.s{idx}"))
    return out


def handle_unaligned(sample: Sample, report: AlignmentReport) -> Sample | None:
    """Drop the report's unaligned slots from the MR; None when nothing is left."""
    if not report.unaligned_slots:
        return sample
    missing = list(report.unaligned_slots)
    kept = []
    for sv in sample.mr.slots:
        if sv.slot in missing:
            missing.remove(sv.slot)
        else:
            kept.append(sv)
    if not kept:
        return None
    return Sample(sample.mr.with_slots(kept), sample.reference, sample.id)


def permute_slots(sample: Sample, cfg: PermutationConfig, rng: np.random.Generator) -> list[Sample]:
    slots = sample.mr.slots
    n = len(slots)
    out = [sample]
    if cfg.k == 0 or n < 2:
        return out
    identity = tuple(range(n))
    if math.factorial(n) - 1 <= cfg.k:
        orders = [p for p in itertools.permutations(range(n)) if p != identity]
    else:
        seen = {identity}
        orders = []
        while len(orders) < cfg.k:
            p = tuple(int(i) for i in rng.permutation(n))
            if p not in seen:
                seen.add(p)
                orders.append(p)
    for j, order in enumerate(orders):
        out.append(Sample(sample.mr.with_slots([slots[i] for i in order]),
                          sample.reference, f"{sample.id}.p{j}"))
    return out


@dataclass
class ExpansionSummary:
    input_size: int
    output_size: int
    dropped_unalignable: int = 0
    cleaned: int = 0
    split_added: int = 0
    deduplicated: int = 0
    permuted_added: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.output_size / self.input_size


def expand_dataset(dataset: Dataset, gaz: Gazetteer | None = None,
                   split_cfg: SplitConfig | None = None,
                   perm_cfg: PermutationConfig | None = None,
                   summary: ExpansionSummary | None = None) -> Dataset:
    """Original samples (unaligned slots removed) plus split sub-samples, optionally permuted."""
    if dataset.split != "train":
        raise ConfigError(f"augmentation applies to the train split only, got {dataset.split!r}")
    permute = perm_cfg is not None and perm_cfg.k > 0
    if split_cfg is None and not permute:
        if summary is not None:
            summary.input_size = summary.output_size = len(dataset)
        return dataset

    out: list[Sample] = []
    seen: set[tuple[str, str]] = set()
    stats = summary if summary is not None else ExpansionSummary(len(dataset), 0)
    stats.input_size = len(dataset)

    def emit(s: Sample) -> bool:
        key = (s.mr.key(), s.reference)
        if key in seen:
            stats.deduplicated += 1
            return False
        seen.add(key)
        out.append(s)
        return True

    for sample in dataset:
        if split_cfg is None:
            emit(sample)
            continue
        if gaz is None:
            raise ConfigError("splitting needs a gazetteer")
        report = align_utterance(sample.reference, sample.mr, gaz)
        if report.unaligned_slots and not split_cfg.keep_unalignable:
            stats.dropped_unalignable += 1
            continue
        cleaned = handle_unaligned(sample, report)
        if cleaned is None:
            stats.dropped_unalignable += 1
            continue
        if cleaned is not sample:
            stats.cleaned += 1
        emit(cleaned)
        subs = split_sample(sample, gaz, split_cfg, report)
        parent_slots = set(cleaned.mr.slot_names)
        for sub in subs:
            sub_slots = set(sub.mr.slot_names) - {split_cfg.position_slot_name}
            if len(report.sentences) == 1 and sub_slots == parent_slots:
                stats.deduplicated += 1
                continue
            if emit(sub):
                stats.split_added += 1

    if permute:
        rng = np.random.default_rng(perm_cfg.seed)
        permuted: list[Sample] = []
        for s in out:
            variants = permute_slots(s, perm_cfg, rng)
            permuted.extend(variants)
            stats.permuted_added += len(variants) - 1
        out = permuted

    stats.output_size = len(out)
    return dataset.replace(out)
