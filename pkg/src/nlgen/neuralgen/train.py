"""Mini-batch training with Adam on mean per-token cross-entropy."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from nlgen.corpus import MeaningRepresentation, Sample, tokenize
from nlgen.neuralgen import autodiff as ad
from nlgen.neuralgen.model import EOS_ID, Hyperparams, Seq2Seq, Vocab, as_vars, batch_loss, init_params

log = logging.getLogger(__name__)


def linearize_mr(mr: MeaningRepresentation) -> list[str]:
    """``da_type slot1 value1 slot2 value2 ...`` as lowercase tokens."""
    out = [mr.da_type.lower()]
    for sv in mr.slots:
        out.append(sv.slot)
        out.extend(tokenize(sv.value).tokens)
    return out


def sample_tokens(sample: Sample) -> tuple[list[str], list[str]]:
    return linearize_mr(sample.mr), tokenize(sample.reference).tokens


@dataclass
class TrainingLog:
    epochs: list[dict] = field(default_factory=list)
    seed: int = 0
    n_train: int = 0
    n_valid: int = 0

    @property
    def train_losses(self) -> list[float]:
        return [e["train_loss"] for e in self.epochs]

    def to_dict(self) -> dict:
        return {"seed": self.seed, "n_train": self.n_train, "n_valid": self.n_valid,
                "epochs": self.epochs}


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for k in sorted(params):
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def loss_and_grads(params: dict[str, np.ndarray], hyper: Hyperparams, src_seqs, tgt_seqs,
                   mean: bool = True) -> tuple[float, dict[str, np.ndarray]]:
    P = as_vars(params, requires_grad=True)
    total, n = batch_loss(P, hyper, src_seqs, tgt_seqs)
    if n == 0:
        return 0.0, {k: np.zeros_like(v) for k, v in params.items()}
    scale = 1.0 / n if mean else 1.0
    ad.backward(total)
    grads = {k: (v.grad * scale if v.grad is not None else np.zeros_like(params[k]))
             for k, v in P.items()}
    return float(total.value) * scale, grads


def _clip(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm > 0 and norm > max_norm:
        for k in grads:
            grads[k] *= max_norm / norm
    return norm


def _corpus_loss(model: Seq2Seq, data, batch_size: int) -> float:
    total, n = 0.0, 0
    with ad.no_grad():
        P = as_vars(model.params)
        for i in range(0, len(data), batch_size):
            chunk = data[i:i + batch_size]
            loss, k = batch_loss(P, model.hyper, [s for s, _ in chunk], [t for _, t in chunk])
            total += float(loss.value)
            n += k
    return total / max(n, 1)


def build_vocabs(pairs) -> tuple[Vocab, Vocab]:
    return Vocab.build(s for s, _ in pairs), Vocab.build(t for _, t in pairs)


def train(samples, hyper: Hyperparams, seed: int | None = None, valid=None,
          src_vocab: Vocab | None = None, tgt_vocab: Vocab | None = None,
          progress=None) -> tuple[Seq2Seq, TrainingLog]:
    """Train one submodel on delexicalized samples.

    Deterministic for a fixed seed: parameter init and batch order both
    come from generators seeded with it.
    """
    seed = hyper.seed if seed is None else seed
    pairs = [sample_tokens(s) for s in samples]
    if src_vocab is None or tgt_vocab is None:
        src_vocab, tgt_vocab = build_vocabs(pairs)
    hyper = replace(hyper, src_vocab_size=len(src_vocab), tgt_vocab_size=len(tgt_vocab), seed=seed)
    model = Seq2Seq(hyper, init_params(hyper, seed), src_vocab, tgt_vocab)

    def ids(pair_list):
        return [(src_vocab.encode(s), tgt_vocab.encode(t) + [EOS_ID]) for s, t in pair_list]

    data = ids(pairs)
    valid_data = ids([sample_tokens(s) for s in valid]) if valid else []
    log_ = TrainingLog(seed=seed, n_train=len(data), n_valid=len(valid_data))
    rng = np.random.default_rng(seed + 1)
    opt = Adam(model.params, lr=hyper.learning_rate)

    def record(epoch, grad_norm=None, seconds=0.0):
        entry = {"epoch": epoch, "train_loss": _corpus_loss(model, data, 64)}
        if valid_data:
            entry["valid_loss"] = _corpus_loss(model, valid_data, 64)
        if grad_norm is not None:
            entry["grad_norm"] = grad_norm
        log_.epochs.append(entry)
        log.info("epoch %d train %.4f%s (%.1fs)", epoch, entry["train_loss"],
                 f" valid {entry['valid_loss']:.4f}" if valid_data else "", seconds)
        if progress is not None:
            progress(entry)

    record(0)
    for epoch in range(1, hyper.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(data))
        norms = []
        for i in range(0, len(order), hyper.batch_size):
            batch = [data[j] for j in order[i:i + hyper.batch_size]]
            _, grads = loss_and_grads(model.params, hyper, [s for s, _ in batch], [t for _, t in batch])
            norms.append(_clip(grads, hyper.clip_norm))
            opt.step(model.params, grads)
        record(epoch, float(np.mean(norms)), time.perf_counter() - t0)
    return model, log_
