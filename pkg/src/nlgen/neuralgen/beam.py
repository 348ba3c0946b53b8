"""Beam search with GNMT-style length normalization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from nlgen.neuralgen import autodiff as ad
from nlgen.neuralgen.autodiff import Var
from nlgen.neuralgen.model import (BOS_ID, EOS_ID, DecoderState, EncoderOutput, Seq2Seq, as_vars,
                                   decode_step_batch, encode_batch, initial_state)


def length_penalty(length: int, alpha: float) -> float:
    """lp(Y) = (5 + |Y|)^alpha / 6^alpha."""
    return ((5.0 + length) / 6.0) ** alpha


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]     # generated ids, ending with EOS unless cut at max_len
    log_prob: float
    score: float                # log_prob / lp(|tokens|)

    @property
    def finished(self) -> bool:
        return bool(self.tokens) and self.tokens[-1] == EOS_ID


# step(prev_tokens (k,), state) -> (log-probs (k, V), new_state); reorder(state, idx) -> state
StepFn = Callable[[np.ndarray, object], tuple[np.ndarray, object]]
ReorderFn = Callable[[object, np.ndarray], object]


def beam_search(step: StepFn, reorder: ReorderFn, init_state, width: int, alpha: float,
                max_len: int, bos: int = BOS_ID, eos: int = EOS_ID) -> list[Hypothesis]:
    """Keep the `width` best raw-log-prob expansions per step.

    Hypotheses that emit EOS leave the beam; the beam shrinks accordingly.
    Candidates are returned sorted by normalized score, best first.
    """
    if width < 1:
        raise ValueError("beam width must be >= 1")
    live_tokens: list[tuple[int, ...]] = [()]
    live_logp = np.zeros(1)
    state = init_state
    prev = np.array([bos])
    finished: list[Hypothesis] = []
    for _ in range(max_len):
        if not live_tokens:
            break
        logp, state = step(prev, state)
        cand = (live_logp[:, None] + logp).ravel()
        k = min(width - len(finished), cand.size)
        if k <= 0:
            break
        order = np.argsort(-cand, kind="stable")[:k]
        V = logp.shape[1]
        keep_rows, new_tokens, new_logp = [], [], []
        for flat in order:
            row, tok = divmod(int(flat), V)
            seq = live_tokens[row] + (tok,)
            lp = float(cand[flat])
            if tok == eos:
                finished.append(Hypothesis(seq, lp, lp / length_penalty(len(seq), alpha)))
            else:
                keep_rows.append(row)
                new_tokens.append(seq)
                new_logp.append(lp)
        live_tokens = new_tokens
        live_logp = np.asarray(new_logp)
        if live_tokens:
            state = reorder(state, np.asarray(keep_rows))
            prev = np.asarray([s[-1] for s in live_tokens])
    for seq, lp in zip(live_tokens, live_logp):
        finished.append(Hypothesis(seq, float(lp), float(lp) / length_penalty(len(seq), alpha)))
    finished.sort(key=lambda hyp: -hyp.score)
    return finished[:width]


def greedy_decode(step: StepFn, init_state, max_len: int, bos: int = BOS_ID,
                  eos: int = EOS_ID) -> tuple[tuple[int, ...], float]:
    tokens: list[int] = []
    total = 0.0
    prev = np.array([bos])
    state = init_state
    for _ in range(max_len):
        logp, state = step(prev, state)
        tok = int(np.argmax(logp[0]))
        total += float(logp[0, tok])
        tokens.append(tok)
        if tok == eos:
            break
        prev = np.array([tok])
    return tuple(tokens), total


class ModelDecoder:
    """Adapts a Seq2Seq model to the step/reorder protocol for one source sequence."""

    def __init__(self, model: Seq2Seq, src_ids):
        self.model = model
        self.P = as_vars(model.params)
        with ad.no_grad():
            src = np.asarray([list(src_ids)], dtype=np.int64)
            self.enc = encode_batch(self.P, model.hyper, src, np.ones(src.shape))
            self.state0 = initial_state(self.P, model.hyper, self.enc)
        self.attention: list[np.ndarray] = []

    def _enc_for(self, k: int):
        e = self.enc
        return EncoderOutput(Var(np.repeat(e.H.value, k, axis=0)), np.repeat(e.mask, k, axis=0),
                             Var(np.repeat(e.HW.value, k, axis=0)))

    def step(self, prev: np.ndarray, state: DecoderState):
        k = len(prev)
        if getattr(self, "_cached_k", None) != k:
            self._cached = self._enc_for(k)
            self._cached_k = k
        with ad.no_grad():
            logits, nxt, alpha = decode_step_batch(self.P, self.model.hyper, prev, state, self._cached)
        self.attention.append(alpha.value)
        return ad.log_softmax_np(logits.value), nxt

    @staticmethod
    def reorder(state: DecoderState, idx: np.ndarray) -> DecoderState:
        return state.take(idx)


def decode(model: Seq2Seq, src_ids, width: int | None = None, alpha: float | None = None,
           max_len: int | None = None) -> list[Hypothesis]:
    h = model.hyper
    dec = ModelDecoder(model, src_ids)
    return beam_search(dec.step, dec.reorder, dec.state0,
                       width if width is not None else h.beam_width,
                       alpha if alpha is not None else h.length_penalty,
                       max_len if max_len is not None else h.max_decode_len)


def greedy(model: Seq2Seq, src_ids, max_len: int | None = None) -> tuple[tuple[int, ...], float]:
    dec = ModelDecoder(model, src_ids)
    return greedy_decode(dec.step, dec.state0, max_len or model.hyper.max_decode_len)
