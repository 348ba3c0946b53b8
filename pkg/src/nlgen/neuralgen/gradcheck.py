"""Central finite-difference verification of the analytic gradients."""

from __future__ import annotations

import numpy as np

from nlgen.neuralgen import autodiff as ad
from nlgen.neuralgen.model import Hyperparams, as_vars, batch_loss
from nlgen.neuralgen.train import loss_and_grads


def _loss(params, hyper, src, tgt) -> float:
    with ad.no_grad():
        total, n = batch_loss(as_vars(params), hyper, [src], [tgt])
    return float(total.value) / n if n else 0.0


def grad_check(params: dict[str, np.ndarray], hyper: Hyperparams, sample, eps: float = 1e-5,
               max_entries: int | None = None, seed: int = 0) -> tuple[float, dict[str, float]]:
    """Compare analytic and central-difference gradients for every parameter group.

    `sample` is (source ids, complete target ids).  The error of a group is
    ||analytic - numeric|| / max(||analytic|| + ||numeric||, 1e-12); the
    maximum over groups is returned with the per-group values.
    `max_entries` caps how many entries per group are perturbed (sampled
    without replacement); None checks every entry.
    """
    src, tgt = sample
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    _, analytic = loss_and_grads(params, hyper, [src], [tgt])
    rng = np.random.default_rng(seed)
    errors = {}
    for name in sorted(params):
        p = params[name]
        flat = p.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, max_entries, replace=False))
        num = np.zeros(len(idx))
        for j, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + eps
            plus = _loss(params, hyper, src, tgt)
            flat[i] = old - eps
            minus = _loss(params, hyper, src, tgt)
            flat[i] = old
            num[j] = (plus - minus) / (2 * eps)
        ana = analytic[name].reshape(-1)[idx]
        denom = max(np.linalg.norm(ana) + np.linalg.norm(num), 1e-12)
        errors[name] = float(np.linalg.norm(ana - num) / denom)
    return max(errors.values()), errors
