"""Meaning representations, dataset loading, tokenization and corpus statistics."""

from __future__ import annotations

import csv
import json
import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from nlgen.errors import DatasetIoError, DuplicateSlot, MalformedMr, ParseError

log = logging.getLogger(__name__)

DIALECTS = ("e2e", "rnnlg")
DOMAINS = ("e2e", "tv", "laptop", "synthetic")
SPLITS = ("train", "validation", "test")


def canonical_slot(name: str) -> str:
    """Lowercase a slot name and join whitespace-separated parts with underscores."""
    return "_".join(name.strip().lower().split())


def _balanced(text: str) -> bool:
    depth = 0
    for ch in text:
        if ch in "[(":
            depth += 1
        elif ch in "])":
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


@dataclass(frozen=True)
class SlotValue:
    slot: str
    value: str

    def __post_init__(self):
        if not self.slot:
            raise MalformedMr("empty slot name")
        if not _balanced(self.value):
            raise MalformedMr(f"unbalanced brackets in value {self.value!r}")


@dataclass(frozen=True)
class MeaningRepresentation:
    da_type: str = "inform"
    slots: tuple[SlotValue, ...] = ()
    dialect: str = "e2e"

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))
        if self.dialect == "e2e":
            seen = set()
            for sv in self.slots:
                if sv.slot in seen:
                    raise DuplicateSlot(f"duplicate slot {sv.slot!r}")
                seen.add(sv.slot)

    @property
    def slot_names(self) -> list[str]:
        return [sv.slot for sv in self.slots]

    def get(self, slot: str, default=None):
        for sv in self.slots:
            if sv.slot == slot:
                return sv.value
        return default

    def __contains__(self, slot: str) -> bool:
        return any(sv.slot == slot for sv in self.slots)

    def __len__(self) -> int:
        return len(self.slots)

    def with_slots(self, slots: Iterable[SlotValue]) -> MeaningRepresentation:
        return MeaningRepresentation(self.da_type, tuple(slots), self.dialect)

    def key(self) -> str:
        """Canonical string used to group references by MR."""
        return serialize_mr(self)

    def __str__(self) -> str:
        return serialize_mr(self)


@dataclass(frozen=True)
class Sample:
    mr: MeaningRepresentation
    reference: str
    id: str

    def __post_init__(self):
        if not self.reference or not self.reference.strip():
            raise ParseError(f"sample {self.id}: empty reference")


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    domain: str = "e2e"
    split: str = "train"

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if not self.samples:
            raise ParseError("dataset has no samples")
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    def replace(self, samples: Sequence[Sample]) -> Dataset:
        return Dataset(tuple(samples), self.domain, self.split)

    def group_by_mr(self) -> dict[str, list[Sample]]:
        groups: dict[str, list[Sample]] = defaultdict(list)
        for s in self.samples:
            groups[s.mr.key()].append(s)
        return dict(groups)


# --------------------------------------------------------------------------
# MR parsing

_RNNLG_RE = re.compile(r"^\s*([^\s(]+)\s*\((.*)\)\s*$", re.S)


def _parse_e2e(text: str) -> MeaningRepresentation:
    slots = []
    i, n = 0, len(text)
    while i < n:
        while i < n and text[i] in " ,\t\n":
            i += 1
        if i >= n:
            break
        open_at = text.find("[", i)
        if open_at < 0:
            raise MalformedMr(f"expected '[' after slot name at {i}: {text!r}")
        name = text[i:open_at]
        if "]" in name or "," in name:
            raise MalformedMr(f"unbalanced brackets near {name!r}")
        if not name.strip():
            raise MalformedMr(f"empty slot name at {i}: {text!r}")
        close_at = text.find("]", open_at + 1)
        nested = text.find("[", open_at + 1)
        if close_at < 0 or (0 <= nested < close_at):
            raise MalformedMr(f"unbalanced brackets in {text!r}")
        slots.append(SlotValue(canonical_slot(name), text[open_at + 1:close_at].strip()))
        i = close_at + 1
    return MeaningRepresentation("inform", tuple(slots), "e2e")


def _strip_quotes(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
        return value[1:-1]
    return value


def _parse_rnnlg(text: str) -> MeaningRepresentation:
    if not _balanced(text):
        raise MalformedMr(f"unbalanced brackets in {text!r}")
    m = _RNNLG_RE.match(text)
    if not m:
        raise MalformedMr(f"expected da(slot=value;...) form: {text!r}")
    da, body = m.group(1).strip(), m.group(2).strip()
    slots = []
    if body:
        for part in body.split(";"):
            if not part.strip():
                continue
            name, sep, value = part.partition("=")
            if not name.strip():
                raise MalformedMr(f"empty slot name in {text!r}")
            slots.append(SlotValue(canonical_slot(name), _strip_quotes(value) if sep else ""))
    return MeaningRepresentation(da, tuple(slots), "rnnlg")


def parse_mr(text: str, dialect: str = "e2e") -> MeaningRepresentation:
    if not text or not text.strip():
        raise MalformedMr("empty MR text")
    if dialect == "e2e":
        return _parse_e2e(text)
    if dialect == "rnnlg":
        return _parse_rnnlg(text)
    raise ValueError(f"unknown dialect {dialect!r}")


def serialize_mr(mr: MeaningRepresentation) -> str:
    if mr.dialect == "e2e":
        return ", ".join(f"{sv.slot}[{sv.value}]" for sv in mr.slots)
    body = ";".join(f"{sv.slot}={sv.value}" if sv.value else sv.slot for sv in mr.slots)
    return f"{mr.da_type}({body})"


# --------------------------------------------------------------------------
# Loading


def _load_request_schema() -> dict[str, list[str]]:
    schema = {}
    text = resources.files("nlgen.data").joinpath("request_schema.tsv").read_text("utf-8")
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        slot, _, triggers = line.partition("\t")
        schema[slot.strip()] = [t.strip().lower() for t in triggers.split(",") if t.strip()]
    return schema


def impute_request_slots(mr: MeaningRepresentation, reference: str,
                         schema: dict[str, list[str]] | None = None) -> MeaningRepresentation:
    """Give a slot-less ?request MR the requested slot (empty value) named in its reference."""
    if mr.slots or mr.da_type != "?request":
        return mr
    schema = schema if schema is not None else _load_request_schema()
    ref = " " + " ".join(t for t in tokenize(reference).tokens) + " "
    best = None
    for slot, triggers in schema.items():
        for trig in triggers:
            pos = ref.find(" " + trig + " ")
            if pos >= 0 and (best is None or (len(trig), -pos) > (best[0], -best[1])):
                best = (len(trig), pos, slot)
    if best is None:
        log.warning("could not impute ?request slot for %r", reference)
        return mr
    return mr.with_slots([SlotValue(best[2], "")])


def load_dataset(path, dialect: str = "e2e", split: str = "train",
                 domain: str | None = None) -> Dataset:
    path = Path(path)
    if domain is None:
        domain = "e2e" if dialect == "e2e" else "laptop"
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetIoError(f"cannot read {path}: {exc}") from exc
    if not raw.strip():
        raise DatasetIoError(f"{path} is empty")

    samples = []
    if dialect == "e2e":
        reader = csv.reader(raw.splitlines())
        header = [h.strip().lower() for h in next(reader)]
        if "mr" not in header or "ref" not in header:
            raise ParseError(f"expected header 'mr,ref', got {header}", row=0)
        mi, ri = header.index("mr"), header.index("ref")
        for idx, row in enumerate(reader):
            if not row:
                continue
            try:
                mr = parse_mr(row[mi], "e2e")
                samples.append(Sample(mr, row[ri].strip(), str(len(samples))))
            except (IndexError, MalformedMr, ParseError) as exc:
                raise ParseError(str(exc), row=idx) from exc
    elif dialect == "rnnlg":
        try:
            entries = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"not a JSON array: {exc}") from exc
        if not isinstance(entries, list):
            raise ParseError("top-level value must be an array")
        schema = _load_request_schema() if domain == "tv" else None
        for idx, entry in enumerate(entries):
            try:
                mr = parse_mr(entry[0], "rnnlg")
                ref = str(entry[1]).strip()
                if schema is not None:
                    mr = impute_request_slots(mr, ref, schema)
                samples.append(Sample(mr, ref, str(idx)))
            except (IndexError, TypeError, MalformedMr, ParseError) as exc:
                raise ParseError(str(exc), row=idx) from exc
    else:
        raise ValueError(f"unknown dialect {dialect!r}")
    if not samples:
        raise ParseError(f"{path} contains no samples")
    return Dataset(tuple(samples), domain, split)


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset in its dialect's native file format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dialect = dataset.samples[0].mr.dialect
    if dialect == "e2e":
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
            w.writerow(["mr", "ref"])
            for s in dataset:
                w.writerow([serialize_mr(s.mr), s.reference])
    else:
        path.write_text(json.dumps([[serialize_mr(s.mr), s.reference] for s in dataset],
                                   ensure_ascii=False, indent=0), encoding="utf-8")


# --------------------------------------------------------------------------
# Tokenization and sentence splitting


@dataclass(frozen=True)
class TokenSequence:
    tokens: list[str]
    offsets: list[tuple[int, int]]

    def __len__(self) -> int:
        return len(self.tokens)


_TOKEN_RE = re.compile(
    r"\w+(?=n't\b)"          # "is" in "isn't"
    r"|n't\b"
    r"|\d+(?:[.,:-]\d+)*"    # 20-25, 3.5
    r"|\w+(?:[-']\w+)*"      # kid-friendly, it's, slot_name
    r"|[^\w\s]",
    re.UNICODE,
)


def tokenize(text: str) -> TokenSequence:
    tokens, offsets = [], []
    for m in _TOKEN_RE.finditer(text):
        tokens.append(m.group().lower())
        offsets.append(m.span())
    return TokenSequence(tokens, offsets)


def normalize_text(text: str) -> str:
    """Space-joined lowercase tokens; the canonical form for comparisons."""
    return " ".join(tokenize(text).tokens)


def detokenize(tokens: Sequence[str]) -> str:
    text = " ".join(tokens)
    text = re.sub(r" ([.,!?;:%)])", r"\1", text)
    text = re.sub(r"([(£$€]) ", r"\1", text)
    text = re.sub(r" n't\b", "n't", text)
    return text


def load_abbreviations(path=None) -> frozenset[str]:
    if path is None:
        text = resources.files("nlgen.data").joinpath("abbreviations.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(l.strip().lower() for l in text.splitlines()
                     if l.strip() and not l.startswith("#"))


_ABBREVIATIONS = None
_BOUNDARY_RE = re.compile(r"[.!?]+[\"')\]]*\s+(?=[A-Z0-9\"'(])")


def split_sentences(text: str, abbreviations: frozenset[str] | None = None) -> list[str]:
    global _ABBREVIATIONS
    if abbreviations is None:
        if _ABBREVIATIONS is None:
            _ABBREVIATIONS = load_abbreviations()
        abbreviations = _ABBREVIATIONS
    norm = " ".join(text.split())
    if not norm:
        return []
    sentences, start = [], 0
    for m in _BOUNDARY_RE.finditer(norm):
        head = norm[start:m.start() + 1]
        last_word = head.rsplit(" ", 1)[-1].lower()
        if m.group().startswith(".") and last_word in abbreviations:
            continue
        sentences.append(norm[start:m.end()].rstrip())
        start = m.end()
    sentences.append(norm[start:])
    return sentences


# --------------------------------------------------------------------------
# Statistics


@dataclass
class DatasetStats:
    counts: dict[str, int]
    total: int
    unique_mr_count: int
    avg_refs_per_unique_mr: float
    slot_count_histogram: dict[int, float]
    avg_sentences_by_slot_count: dict[int, float]
    da_distribution: dict[str, float]
    slot_type_count: int
    da_type_count: int
    slot_types: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "counts": self.counts,
            "total": self.total,
            "unique_mr_count": self.unique_mr_count,
            "avg_refs_per_unique_mr": self.avg_refs_per_unique_mr,
            "slot_count_histogram": {str(k): v for k, v in self.slot_count_histogram.items()},
            "avg_sentences_by_slot_count": {str(k): v for k, v in self.avg_sentences_by_slot_count.items()},
            "da_distribution": self.da_distribution,
            "slot_type_count": self.slot_type_count,
            "da_type_count": self.da_type_count,
            "slot_types": self.slot_types,
        }


def compute_stats(*datasets: Dataset) -> DatasetStats:
    """Statistics over one or more datasets (typically the splits of one corpus).

    The slot-count histogram is over unique MRs; sentence averages and the
    DA distribution are over samples.
    """
    if not datasets:
        raise ValueError("compute_stats needs at least one dataset")
    counts: Counter = Counter()
    unique: dict[str, MeaningRepresentation] = {}
    sent_sum: Counter = Counter()
    sent_n: Counter = Counter()
    das: Counter = Counter()
    slot_types = set()
    for ds in datasets:
        counts[ds.split] += len(ds)
        for s in ds:
            unique.setdefault(s.mr.key() + "|" + s.mr.da_type, s.mr)
            n = len(s.mr)
            sent_sum[n] += len(split_sentences(s.reference))
            sent_n[n] += 1
            das[s.mr.da_type] += 1
            slot_types.update(s.mr.slot_names)
    total = sum(counts.values())
    slot_hist = Counter(len(mr) for mr in unique.values())
    n_unique = len(unique)
    return DatasetStats(
        counts=dict(counts),
        total=total,
        unique_mr_count=n_unique,
        avg_refs_per_unique_mr=total / n_unique,
        slot_count_histogram={k: slot_hist[k] / n_unique for k in sorted(slot_hist)},
        avg_sentences_by_slot_count={k: sent_sum[k] / sent_n[k] for k in sorted(sent_n)},
        da_distribution={k: v / total for k, v in sorted(das.items())},
        slot_type_count=len(slot_types),
        da_type_count=len(das),
        slot_types=sorted(slot_types),
    )
