"""Candidate pooling across submodels and reranking by slot alignment."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from nlgen.aligner import AlignmentReport, Gazetteer, align_utterance, default_gazetteer
from nlgen.corpus import MeaningRepresentation, detokenize, parse_mr
from nlgen.delex import PLACEHOLDER_RE, DelexPolicy, delexicalize_mr, relexicalize
from nlgen.errors import ConfigError, DomainError, EmptyPool
from nlgen.neuralgen.beam import decode
from nlgen.neuralgen.checkpoint import load_checkpoint
from nlgen.neuralgen.model import ENCODERS, Seq2Seq
from nlgen.neuralgen.train import linearize_mr


def slot_alignment_score(n: int, n_unaligned: int, n_over: int) -> float:
    """s_align = N / ((N_u + 1)(N_o + 1))."""
    if n < 1:
        raise DomainError(f"slot_alignment_score needs N >= 1, got {n}")
    if not 0 <= n_unaligned <= n or n_over < 0:
        raise DomainError(f"invalid counts N={n} N_u={n_unaligned} N_o={n_over}")
    return n / ((n_unaligned + 1) * (n_over + 1))


@dataclass(frozen=True)
class Candidate:
    tokens: tuple[str, ...]
    log_prob: float
    normalized_score: float
    source_model: str
    beam_rank: int
    model_index: int = 0        # position of the source in the roster, for tie-breaking

    @property
    def text(self) -> str:
        return detokenize(self.tokens)


@dataclass(frozen=True)
class SubmodelSpec:
    checkpoint: str
    encoder: str = "bilstm"
    epochs: int = 0
    alpha: float | None = None      # None: the checkpoint's own length penalty
    name: str | None = None

    def __post_init__(self):
        if self.encoder not in ENCODERS:
            raise ConfigError(f"unknown encoder {self.encoder!r}")

    @property
    def label(self) -> str:
        return self.name or Path(self.checkpoint).name


_SPEC_KEYS = {"version", "submodels", "pool_k", "policy", "gazetteer"}
_SUB_KEYS = {"checkpoint", "encoder", "epochs", "alpha", "name"}


@dataclass
class EnsembleSpec:
    submodels: list[SubmodelSpec]
    pool_k: int = 10
    policy: str | None = None       # DelexPolicy JSON; None: domain default
    gazetteer: str | None = None    # saved Gazetteer JSON; None: rule-based default
    base_dir: Path = field(default=Path("."), compare=False)

    def __post_init__(self):
        if not self.submodels:
            raise ConfigError("an ensemble needs at least one submodel")
        if self.pool_k < 1:
            raise ConfigError("pool_k must be >= 1")

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path

    def to_dict(self) -> dict:
        subs = []
        for s in self.submodels:
            d = {"checkpoint": s.checkpoint, "encoder": s.encoder, "epochs": s.epochs}
            if s.alpha is not None:
                d["alpha"] = s.alpha
            if s.name is not None:
                d["name"] = s.name
            subs.append(d)
        out = {"version": 1, "submodels": subs, "pool_k": self.pool_k}
        if self.policy is not None:
            out["policy"] = self.policy
        if self.gazetteer is not None:
            out["gazetteer"] = self.gazetteer
        return out

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> EnsembleSpec:
        unknown = set(d) - _SPEC_KEYS
        if unknown:
            raise ConfigError(f"unknown ensemble keys {sorted(unknown)}")
        if d.get("version", 1) != 1:
            raise ConfigError(f"unsupported ensemble spec version {d.get('version')}")
        subs = []
        for s in d.get("submodels", []):
            bad = set(s) - _SUB_KEYS
            if bad:
                raise ConfigError(f"unknown submodel keys {sorted(bad)}")
            subs.append(SubmodelSpec(**s))
        return cls(subs, int(d.get("pool_k", 10)), d.get("policy"), d.get("gazetteer"), Path(base_dir))

    @classmethod
    def load(cls, path) -> EnsembleSpec:
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read ensemble spec {path}: {exc}") from exc
        return cls.from_dict(d, path.parent)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass
class Submodel:
    label: str
    model: Seq2Seq
    alpha: float


class Ensemble:
    """Loaded submodels plus the shared delexicalization policy and gazetteer."""

    def __init__(self, submodels: list[Submodel], pool_k: int = 10,
                 policy: DelexPolicy | None = None, gaz: Gazetteer | None = None):
        if not submodels:
            raise ConfigError("an ensemble needs at least one submodel")
        self.submodels = submodels
        self.pool_k = pool_k
        self.policy = policy or DelexPolicy.default("e2e")
        self.gaz = gaz if gaz is not None else default_gazetteer(delex_slots=sorted(self.policy.delex_slots))

    @classmethod
    def from_spec(cls, spec: EnsembleSpec) -> Ensemble:
        subs = []
        for s in spec.submodels:
            model = load_checkpoint(spec.resolve(s.checkpoint))
            if model.hyper.encoder != s.encoder:
                raise ConfigError(f"{s.label}: spec says {s.encoder}, checkpoint has {model.hyper.encoder}")
            alpha = s.alpha if s.alpha is not None else model.hyper.length_penalty
            subs.append(Submodel(s.label, model, alpha))
        policy = DelexPolicy.from_file(spec.resolve(spec.policy)) if spec.policy else None
        gaz = Gazetteer.load(spec.resolve(spec.gazetteer)) if spec.gazetteer else None
        return cls(subs, spec.pool_k, policy, gaz)


def pool_candidates(ensemble: Ensemble, delex_mr: MeaningRepresentation,
                    k: int | None = None) -> list[Candidate]:
    """Top-k beam candidates from every submodel, in roster order.

    Identical token sequences from different submodels are kept separately.
    """
    k = k or ensemble.pool_k
    src = linearize_mr(delex_mr)
    pool = []
    for idx, sub in enumerate(ensemble.submodels):
        ids = sub.model.src_vocab.encode(src)
        hyps = decode(sub.model, ids, width=k, alpha=sub.alpha)
        for rank, h in enumerate(hyps[:k]):
            tokens = tuple(sub.model.tgt_vocab.decode(h.tokens))
            pool.append(Candidate(tokens, h.log_prob, h.score, sub.label, rank, idx))
    return pool


@dataclass(frozen=True)
class RankedCandidate:
    candidate: Candidate
    s_align: float
    final_score: float
    report: AlignmentReport
    text: str                   # provisional relexicalization


@dataclass
class RerankResult:
    ranked: list[RankedCandidate]

    @property
    def winner(self) -> Candidate:
        return self.ranked[0].candidate

    def to_dict(self) -> dict:
        return {"ranked": [{
            "text": r.text,
            "tokens": list(r.candidate.tokens),
            "source_model": r.candidate.source_model,
            "beam_rank": r.candidate.beam_rank,
            "log_prob": r.candidate.log_prob,
            "normalized_score": r.candidate.normalized_score,
            "s_align": r.s_align,
            "final_score": r.final_score,
            "unaligned": r.report.unaligned_slots,
            "overgenerated": [slot for slot, _ in r.report.overgenerated],
        } for r in self.ranked]}


def rerank(pool: list[Candidate], mr: MeaningRepresentation, gaz: Gazetteer,
           policy: DelexPolicy | None = None) -> RerankResult:
    """Order the pool by exp(normalized score) * s_align.

    `mr` is the lexical MR; each candidate is relexicalized against it before
    alignment.  Orphan placeholders stay in the text, where the aligner reads
    them as realizations of their slot.  MRs without slots use s_align = 1.
    """
    if not pool:
        raise EmptyPool("cannot rerank an empty candidate pool")
    rows = []
    for cand in pool:
        text, _ = relexicalize(cand.text, mr, policy)
        report = align_utterance(text, mr, gaz)
        if report.total_slots:
            s = slot_alignment_score(report.total_slots, report.n_unaligned, report.n_overgenerated)
        else:
            s = 1.0
        rows.append(RankedCandidate(cand, s, math.exp(cand.normalized_score) * s, report, text))
    rows.sort(key=lambda r: (-r.final_score, r.candidate.model_index, r.candidate.beam_rank))
    return RerankResult(rows)


_SPACE_RE = re.compile(r"\s+")


def finalize_text(text: str) -> str:
    """Drop leftover placeholders, squeeze whitespace, capitalize sentence starts."""
    text = _SPACE_RE.sub(" ", PLACEHOLDER_RE.sub("", text)).strip()
    text = re.sub(r"\s+([.,!?;:])", r"\1", text)
    return re.sub(r"(^|[.!?]\s+)([a-z])", lambda m: m.group(1) + m.group(2).upper(), text)


def generate(ensemble: Ensemble, raw_mr: str | MeaningRepresentation,
             dialect: str = "e2e") -> tuple[str, RerankResult]:
    mr = raw_mr if isinstance(raw_mr, MeaningRepresentation) else parse_mr(raw_mr, dialect)
    delex_mr = delexicalize_mr(mr, ensemble.policy)
    result = rerank(pool_candidates(ensemble, delex_mr), mr, ensemble.gaz, ensemble.policy)
    # the winner, unless it is empty after cleanup (e.g. an immediate end token)
    for row in result.ranked:
        text = finalize_text(relexicalize(row.candidate.text, mr, ensemble.policy)[0])
        if text:
            return text, result
    return "", result
