"""Report figures rendered to PNG with the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.2),
    "figure.dpi": 100,
    "axes.linewidth": 0.6,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no software/date metadata so identical inputs give identical files
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_slot_histogram(stats, path) -> Path:
    """Bar chart of the share of unique MRs per slot count."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        hist = stats.slot_count_histogram
        keys = sorted(hist)
        ax.bar([str(k) for k in keys], [100.0 * hist[k] for k in keys], color="0.45")
        ax.set_xlabel("slots per MR")
        ax.set_ylabel("unique MRs (%)")
        return _save(fig, path)


def plot_sentences_by_slots(stats, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        d = stats.avg_sentences_by_slot_count
        keys = sorted(d)
        ax.plot(keys, [d[k] for k in keys], "o-", color="k", lw=1)
        ax.set_xlabel("slots per MR")
        ax.set_ylabel("sentences per reference")
        return _save(fig, path)


def plot_training_log(log, path) -> Path:
    """Per-epoch training (and validation) loss."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ep = [e["epoch"] for e in log.epochs]
        ax.plot(ep, [e["train_loss"] for e in log.epochs], "o-", ms=3, lw=1, label="train")
        if any("valid_loss" in e for e in log.epochs):
            ax.plot(ep, [e.get("valid_loss", float("nan")) for e in log.epochs], "s--", ms=3, lw=1,
                    label="valid")
        ax.set_xlabel("epoch")
        ax.set_ylabel("cross-entropy (nats/token)")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_metrics(report: dict, path) -> Path:
    """Bounded metrics as bars; NIST is on a different scale and goes in the title."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        names = [k for k in ("bleu", "meteor_lite", "rouge_l", "err") if report.get(k) is not None]
        ax.bar(names, [report[k] for k in names], color="0.45")
        ax.set_ylim(0, 1)
        ax.set_ylabel("score")
        if report.get("nist") is not None:
            ax.set_title(f"nist = {report['nist']:.4f}")
        return _save(fig, path)


def plot_rerank(result, path) -> Path:
    """Model score against final score for every pooled candidate."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for src in sorted({r.candidate.source_model for r in result.ranked}):
            rows = [r for r in result.ranked if r.candidate.source_model == src]
            ax.scatter([r.candidate.normalized_score for r in rows], [r.final_score for r in rows],
                       s=12, label=src)
        ax.set_xlabel("normalized log-prob")
        ax.set_ylabel("final score")
        ax.legend(frameon=False, fontsize=7)
        return _save(fig, path)


def plot_selection_scores(scores, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.hist(scores, bins=min(40, max(5, len(set(scores)))), color="0.45")
        ax.set_xlabel("complexity score")
        ax.set_ylabel("references")
        return _save(fig, path)
