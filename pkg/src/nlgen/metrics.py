"""Corpus-level BLEU, NIST, METEOR-lite, ROUGE-L and slot error rate."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from nlgen.corpus import MeaningRepresentation, parse_mr, tokenize
from nlgen.errors import EmptyInput


@dataclass(frozen=True)
class EvalPair:
    hypothesis: str
    references: tuple[str, ...]
    mr: MeaningRepresentation | None = None

    def __post_init__(self):
        object.__setattr__(self, "references", tuple(self.references))
        if not self.references:
            raise EmptyInput("an evaluation pair needs at least one reference")


def _as_pairs(pairs) -> list[EvalPair]:
    pairs = [p if isinstance(p, EvalPair) else EvalPair(p[0], tuple(p[1])) for p in pairs]
    if not pairs:
        raise EmptyInput("no hypotheses to evaluate")
    return pairs


def _toks(text: str) -> list[str]:
    return tokenize(text).tokens


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


# --------------------------------------------------------------------------
# BLEU


def bleu_stats(pairs, max_n: int = 4) -> dict:
    pairs = _as_pairs(pairs)
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for p in pairs:
        hyp = _toks(p.hypothesis)
        refs = [_toks(r) for r in p.references]
        hyp_len += len(hyp)
        # closest reference length, shorter on ties
        ref_len += min((abs(len(r) - len(hyp)), len(r)) for r in refs)[1]
        for n in range(1, max_n + 1):
            h = ngrams(hyp, n)
            max_ref: Counter = Counter()
            for r in refs:
                max_ref |= ngrams(r, n)
            matches[n - 1] += sum(min(c, max_ref[g]) for g, c in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)
    return {"matches": matches, "totals": totals, "hyp_len": hyp_len, "ref_len": ref_len}


def bleu(pairs, max_n: int = 4, smooth: bool = False) -> float:
    st = bleu_stats(pairs, max_n)
    c, r = st["hyp_len"], st["ref_len"]
    if c == 0:
        return 0.0
    log_p = 0.0
    for n in range(max_n):
        m, t = st["matches"][n], st["totals"][n]
        if smooth and n > 0:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_p += math.log(m / t) / max_n
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(log_p)


# --------------------------------------------------------------------------
# NIST

_NIST_BETA = -math.log(0.5) / math.log(1.5) ** 2


def nist_information(pairs, max_n: int = 5) -> dict[tuple[str, ...], float]:
    """Information weight of every reference n-gram: log2(count(prefix) / count(ngram))."""
    counts: Counter = Counter()
    total_words = 0
    for p in _as_pairs(pairs):
        for r in p.references:
            toks = _toks(r)
            total_words += len(toks)
            for n in range(1, max_n + 1):
                counts.update(ngrams(toks, n))
    info = {}
    for g, c in counts.items():
        prefix = total_words if len(g) == 1 else counts[g[:-1]]
        info[g] = math.log2(prefix / c)
    return info


def nist(pairs, max_n: int = 5) -> float:
    pairs = _as_pairs(pairs)
    info = nist_information(pairs, max_n)
    gained = [0.0] * max_n
    totals = [0] * max_n
    hyp_len = 0
    ref_len = 0.0
    for p in pairs:
        hyp = _toks(p.hypothesis)
        refs = [_toks(r) for r in p.references]
        hyp_len += len(hyp)
        ref_len += sum(len(r) for r in refs) / len(refs)
        for n in range(1, max_n + 1):
            h = ngrams(hyp, n)
            max_ref: Counter = Counter()
            for r in refs:
                max_ref |= ngrams(r, n)
            totals[n - 1] += sum(h.values())
            gained[n - 1] += sum(info[g] * min(c, max_ref[g]) for g, c in h.items() if g in max_ref)
    score = sum(g / t for g, t in zip(gained, totals) if t > 0)
    ratio = hyp_len / ref_len if ref_len else 0.0
    if ratio <= 0:
        return 0.0
    bp = math.exp(-_NIST_BETA * math.log(min(ratio, 1.0)) ** 2)
    return score * bp


# --------------------------------------------------------------------------
# ROUGE-L


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l_pair(hyp: Sequence[str], ref: Sequence[str], beta: float = 1.2) -> float:
    lcs = lcs_length(hyp, ref)
    if lcs == 0:
        return 0.0
    p, r = lcs / len(hyp), lcs / len(ref)
    return (1 + beta ** 2) * p * r / (r + beta ** 2 * p)


def rouge_l(pairs, beta: float = 1.2) -> float:
    pairs = _as_pairs(pairs)
    total = 0.0
    for p in pairs:
        hyp = _toks(p.hypothesis)
        total += max(rouge_l_pair(hyp, _toks(r), beta) for r in p.references)
    return total / len(pairs)


# --------------------------------------------------------------------------
# METEOR-lite: exact and stem matching only

METEOR_ALPHA, METEOR_BETA, METEOR_GAMMA = 0.9, 3.0, 0.5
_SUFFIXES = (("ies", "y"), ("sses", "ss"), ("ness", ""), ("ment", ""), ("ing", ""),
             ("edly", ""), ("ed", ""), ("ly", ""), ("es", ""), ("s", ""))


def stem(word: str) -> str:
    """Rule-based suffix stripper; keeps at least three characters of stem."""
    for suffix, repl in _SUFFIXES:
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            if suffix == "s" and word.endswith("ss"):
                continue
            return word[: len(word) - len(suffix)] + repl
    return word


def meteor_align(hyp: Sequence[str], ref: Sequence[str]) -> list[tuple[int, int]]:
    """Exact matches first, then stem matches among the rest.

    Within a stage each hypothesis word (left to right) takes the free
    reference position that extends the previous match's chunk when
    possible, otherwise the leftmost free one.
    """
    used_h, used_r = set(), set()
    pairs: list[tuple[int, int]] = []
    for key in (lambda w: w, stem):
        hk = [key(w) for w in hyp]
        rk = [key(w) for w in ref]
        for i, w in enumerate(hk):
            if i in used_h:
                continue
            free = [j for j, v in enumerate(rk) if v == w and j not in used_r]
            if not free:
                continue
            prev = next((rj for hi, rj in pairs if hi == i - 1), None)
            j = prev + 1 if prev is not None and prev + 1 in free else free[0]
            used_h.add(i)
            used_r.add(j)
            pairs.append((i, j))
    return sorted(pairs)


def count_chunks(alignment: list[tuple[int, int]]) -> int:
    if not alignment:
        return 0
    chunks = 1
    for (h0, r0), (h1, r1) in zip(alignment, alignment[1:]):
        if not (h1 == h0 + 1 and r1 == r0 + 1):
            chunks += 1
    return chunks


def meteor_pair(hyp: Sequence[str], ref: Sequence[str]) -> float:
    alignment = meteor_align(hyp, ref)
    m = len(alignment)
    if m == 0:
        return 0.0
    p, r = m / len(hyp), m / len(ref)
    fmean = p * r / (METEOR_ALPHA * p + (1 - METEOR_ALPHA) * r)
    chunks = count_chunks(alignment)
    frag = (chunks - 1) / (m - 1) if m > 1 else 0.0
    return fmean * (1 - METEOR_GAMMA * frag ** METEOR_BETA)


def meteor_lite(pairs) -> float:
    pairs = _as_pairs(pairs)
    total = 0.0
    for p in pairs:
        hyp = _toks(p.hypothesis)
        total += max(meteor_pair(hyp, _toks(r)) for r in p.references)
    return total / len(pairs)


# --------------------------------------------------------------------------
# Slot error rate


def slot_error_counts(outputs: Iterable[tuple[str, MeaningRepresentation]], gaz) -> tuple[int, int, int]:
    from nlgen.aligner import align_utterance

    missed = over = total = 0
    for utterance, mr in outputs:
        rep = align_utterance(utterance, mr, gaz)
        missed += rep.n_unaligned
        over += rep.n_overgenerated
        total += rep.total_slots
    return missed, over, total


def slot_error_rate(outputs, gaz, mode: str = "human") -> float:
    """Missed slots over total slots; "rnnlg" mode also counts over-generated slots."""
    missed, over, total = slot_error_counts(outputs, gaz)
    if total == 0:
        return 0.0
    if mode == "rnnlg":
        return (missed + over) / total
    if mode == "human":
        return missed / total
    raise ValueError(f"unknown ERR mode {mode!r}")


# --------------------------------------------------------------------------
# Reports


@dataclass
class MetricReport:
    bleu: float
    nist: float
    meteor_lite: float
    rouge_l: float
    err: float | None = None
    err_rnnlg: float | None = None
    n_pairs: int = 0
    config: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)

    def as_lines(self) -> list[str]:
        out = []
        for key in ("bleu", "nist", "meteor_lite", "rouge_l", "err", "err_rnnlg", "n_pairs"):
            val = getattr(self, key)
            if val is None:
                continue
            out.append(f"{key}={val:.4f}" if isinstance(val, float) else f"{key}={val}")
        return out


def evaluate(pairs, gaz=None, bleu_smooth: bool = False, rouge_beta: float = 1.2) -> MetricReport:
    pairs = _as_pairs(pairs)
    err = err_rnnlg = None
    if gaz is not None and all(p.mr is not None for p in pairs):
        missed, over, total = slot_error_counts(((p.hypothesis, p.mr) for p in pairs), gaz)
        err = missed / total if total else 0.0
        err_rnnlg = (missed + over) / total if total else 0.0
    return MetricReport(
        bleu=bleu(pairs, smooth=bleu_smooth),
        nist=nist(pairs),
        meteor_lite=meteor_lite(pairs),
        rouge_l=rouge_l(pairs, rouge_beta),
        err=err,
        err_rnnlg=err_rnnlg,
        n_pairs=len(pairs),
        config={
            "bleu": {"max_n": 4, "smooth": bleu_smooth, "brevity": "closest reference"},
            "nist": {"max_n": 5},
            "rouge_l": {"beta": rouge_beta},
            "meteor_lite": {"alpha": METEOR_ALPHA, "beta": METEOR_BETA, "gamma": METEOR_GAMMA,
                            "modules": ["exact", "stem"],
                            "note": "no synonym or paraphrase matching; not comparable to METEOR"},
            "tokenization": "lowercase, punctuation split",
        },
    )


def read_eval_files(hyp_path, ref_path, mr_path=None, dialect: str = "e2e") -> list[EvalPair]:
    """Hypotheses one per line; references grouped per MR, groups separated by blank lines."""
    hyps = [l.rstrip("\n") for l in Path(hyp_path).read_text("utf-8").splitlines()]
    while hyps and not hyps[-1].strip():
        hyps.pop()
    groups: list[list[str]] = [[]]
    for line in Path(ref_path).read_text("utf-8").splitlines():
        if line.strip():
            groups[-1].append(line.strip())
        elif groups[-1]:
            groups.append([])
    if not groups[-1]:
        groups.pop()
    if len(groups) == 1 and len(hyps) > 1 and len(groups[0]) == len(hyps):
        groups = [[r] for r in groups[0]]
    if len(groups) != len(hyps):
        raise EmptyInput(f"{len(hyps)} hypotheses but {len(groups)} reference groups")
    mrs: list = [None] * len(hyps)
    if mr_path is not None:
        lines = [l for l in Path(mr_path).read_text("utf-8").splitlines() if l.strip()]
        if len(lines) != len(hyps):
            raise EmptyInput(f"{len(hyps)} hypotheses but {len(lines)} MRs")
        mrs = [parse_mr(l, dialect) for l in lines]
    return [EvalPair(h, tuple(g), m) for h, g, m in zip(hyps, groups, mrs)]
