"""Command-line entry point: ``nlgen <command> [options]``.

Every command prints ``key=value`` lines to stdout and, when ``--out-dir`` is
given, writes ``<command>.json`` plus PNG figures there.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from nlgen import errors
from nlgen.aligner import Gazetteer, align_utterance, default_gazetteer
from nlgen.augment import ExpansionSummary, PermutationConfig, SplitConfig, expand_dataset
from nlgen.config import RunConfig
from nlgen.corpus import Dataset, Sample, compute_stats, load_dataset, parse_mr, save_dataset
from nlgen.delex import DelexPolicy, delexicalize
from nlgen.ensemble import Ensemble, EnsembleSpec, SubmodelSpec, generate
from nlgen.metrics import EvalPair, evaluate, read_eval_files
from nlgen.neuralgen.checkpoint import save_checkpoint
from nlgen.neuralgen.model import Hyperparams
from nlgen.neuralgen.train import train
from nlgen.styleselect import SelectionPolicy, complexity_score, profile_utterance, select_references
from nlgen.synthetic import SyntheticGrammar, gen_synthetic

log = logging.getLogger("nlgen")

# exit codes per failure class
EXIT_CODES = [
    (errors.ConfigError, 2),
    (errors.DatasetIoError, 3),
    (errors.ParseError, 4),
    (errors.MalformedMr, 4),
    (errors.CheckpointError, 5),
    (errors.GrammarError, 6),
    (errors.NlgError, 1),
    (OSError, 3),
]


def _emit(values: dict) -> None:
    for k, v in values.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        print(f"{k}={v}")


def _write_report(args, name: str, payload: dict) -> Path | None:
    if not args.out_dir:
        return None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    return path


def _figure(args, fn, *a, name: str):
    if not args.out_dir or args.no_figures:
        return None
    from nlgen import plotting
    return str(getattr(plotting, fn)(*a, Path(args.out_dir) / f"{name}.png"))


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _split_of(path: str, default: str = "train") -> str:
    name = Path(path).name.lower()
    for key, split in (("train", "train"), ("dev", "validation"), ("valid", "validation"),
                       ("test", "test")):
        if key in name:
            return split
    return default


def _load(args, path=None, split=None) -> Dataset:
    path = path or args.data
    return load_dataset(path, args.dialect, split or getattr(args, "split_name", None) or _split_of(path),
                        getattr(args, "domain", None))


def _gazetteer(args, train: Dataset | None, policy: DelexPolicy) -> Gazetteer:
    if getattr(args, "gazetteer", None):
        return Gazetteer.load(args.gazetteer)
    return default_gazetteer(train, delex_slots=sorted(policy.delex_slots))


# --------------------------------------------------------------------------
# commands


def cmd_stats(args) -> dict:
    datasets = [_load(args, p) for p in args.data]
    stats = compute_stats(*datasets)
    d = stats.as_dict()
    out = {f"samples_{k}": v for k, v in sorted(stats.counts.items())}
    out.update(samples_total=stats.total, unique_mrs=stats.unique_mr_count,
               refs_per_mr=stats.avg_refs_per_unique_mr, slot_types=stats.slot_type_count,
               da_types=stats.da_type_count)
    for k, v in sorted(stats.avg_sentences_by_slot_count.items()):
        out[f"sentences_at_{k}_slots"] = v
    figs = [_figure(args, "plot_slot_histogram", stats, name="stats_slot_histogram"),
            _figure(args, "plot_sentences_by_slots", stats, name="stats_sentences")]
    d["figures"] = [f for f in figs if f]
    _write_report(args, "stats", d)
    return out


def cmd_align(args) -> dict:
    cfg = _config(args)
    policy = cfg.policy()
    if args.mr is not None:
        if args.utterance is None:
            raise errors.ConfigError("--mr needs --utterance")
        samples = [Sample(parse_mr(args.mr, args.dialect), args.utterance, "0")]
        train = None
    else:
        train = _load(args)
        samples = list(train)
    gaz = _gazetteer(args, train, policy)
    rows, missed, over, total = [], 0, 0, 0
    for s in samples:
        r = align_utterance(s.reference, s.mr, gaz)
        missed += r.n_unaligned
        over += r.n_overgenerated
        total += r.total_slots
        rows.append({"id": s.id, "sentences": r.sentences,
                     "per_sentence": [[i, slots] for i, slots in r.per_sentence],
                     "unaligned": r.unaligned_slots,
                     "overgenerated": [slot for slot, _ in r.overgenerated]})
    if args.save_gazetteer:
        gaz.save(args.save_gazetteer)
    out = {"samples": len(samples), "slots": total, "unaligned": missed, "overgenerated": over,
           "err": missed / total if total else 0.0,
           "err_rnnlg": (missed + over) / total if total else 0.0}
    if len(rows) == 1:
        out["per_sentence"] = json.dumps(rows[0]["per_sentence"])
    _write_report(args, "align", {"summary": out, "samples": rows})
    return out


def cmd_preprocess(args) -> dict:
    cfg = _config(args)
    policy = DelexPolicy.from_file(args.policy) if args.policy else cfg.policy()
    ds = _load(args)
    out_samples, missing = [], 0
    subs = []
    for s in ds:
        d = delexicalize(s, policy)
        missing += len(d.unsubstituted)
        out_samples.append(Sample(d.delex_mr, d.delex_utterance, s.id))
        subs.append({"id": s.id, "unsubstituted": d.unsubstituted})
    save_dataset(ds.replace(out_samples), args.out)
    out = {"samples": len(out_samples), "values_not_found": missing, "output": args.out}
    _write_report(args, "preprocess", {"summary": out, "policy": policy.to_dict(), "samples": subs})
    return out


def cmd_augment(args) -> dict:
    cfg = _config(args)
    ds = _load(args, split="train")
    gaz = _gazetteer(args, ds, cfg.policy())
    split_cfg = cfg.split if args.split else None
    perm_cfg = PermutationConfig(args.permute, cfg.seed) if args.permute else None
    summary = ExpansionSummary(len(ds), 0)
    out_ds = expand_dataset(ds, gaz, split_cfg, perm_cfg, summary)
    summary.output_size = len(out_ds)
    save_dataset(out_ds, args.out)
    out = {"input": summary.input_size, "output": summary.output_size, "ratio": summary.ratio,
           "split_added": summary.split_added, "permuted_added": summary.permuted_added,
           "deduplicated": summary.deduplicated, "dropped_unalignable": summary.dropped_unalignable}
    _write_report(args, "augment", out)
    return out


def cmd_select(args) -> dict:
    cfg = _config(args)
    pol = cfg.selection
    if args.top_n is not None or args.threshold is not None:
        mode = "threshold" if args.threshold is not None else "top_per_mr"
        pol = SelectionPolicy(pol.weights, pol.sentence_penalty, mode,
                              args.top_n if args.top_n is not None else pol.top_n,
                              args.threshold if args.threshold is not None else pol.threshold)
    ds = _load(args, split="train")
    sel = select_references(ds, pol)
    save_dataset(sel, args.out)
    scores = [complexity_score(profile_utterance(s.reference), pol) for s in ds]
    out = {"input": len(ds), "selected": len(sel), "mode": pol.mode,
           "mean_score_all": float(np.mean(scores)),
           "mean_score_selected": float(np.mean([complexity_score(profile_utterance(s.reference), pol)
                                                 for s in sel]))}
    fig = _figure(args, "plot_selection_scores", scores, name="select_scores")
    _write_report(args, "select", {**out, "figures": [fig] if fig else []})
    return out


def cmd_train(args) -> dict:
    cfg = _config(args)
    policy = cfg.policy()
    ds = _load(args, split="train")
    delex = [Sample(d.delex_mr, d.delex_utterance, s.id) for s in ds for d in [delexicalize(s, policy)]]
    valid = None
    if args.valid:
        vds = _load(args, args.valid, split="validation")
        valid = [Sample(d.delex_mr, d.delex_utterance, s.id) for s in vds for d in [delexicalize(s, policy)]]
    overrides = {k: v for k, v in (("encoder", args.encoder), ("epochs", args.epochs),
                                   ("learning_rate", args.lr), ("embed_dim", args.embed),
                                   ("enc_hidden", args.hidden), ("dec_hidden", args.hidden),
                                   ("attn_dim", args.hidden), ("dec_layers", args.layers),
                                   ("length_penalty", args.alpha)) if v is not None}
    hyper = Hyperparams.from_dict({**cfg.hyperparams.to_dict(), **overrides})
    model, tlog = train(delex, hyper, seed=cfg.seed, valid=valid)
    ckpt = Path(args.out)
    save_checkpoint(model, ckpt, extra={"training_log": tlog.to_dict()})
    gaz = default_gazetteer(ds, delex_slots=sorted(policy.delex_slots))
    gaz.save(ckpt / "gazetteer.json")
    if args.add_to_ensemble:
        spec_path = Path(args.add_to_ensemble)
        rel = _relpath(ckpt, spec_path.parent)
        entry = SubmodelSpec(rel, hyper.encoder, hyper.epochs, None, args.name)
        if spec_path.exists():
            spec = EnsembleSpec.load(spec_path)
            spec.submodels = [s for s in spec.submodels if s.checkpoint != rel] + [entry]
        else:
            spec = EnsembleSpec([entry], gazetteer=_relpath(ckpt / "gazetteer.json", spec_path.parent))
        spec.save(spec_path)
    out = {"samples": len(delex), "epochs": hyper.epochs, "encoder": hyper.encoder,
           "initial_loss": tlog.train_losses[0], "final_loss": tlog.train_losses[-1],
           "checkpoint": str(ckpt)}
    fig = _figure(args, "plot_training_log", tlog, name="train_loss")
    _write_report(args, "train", {**out, "log": tlog.to_dict(), "hyperparams": hyper.to_dict(),
                                  "figures": [fig] if fig else []})
    return out


def _relpath(path: Path, base: Path) -> str:
    try:
        return str(path.resolve().relative_to(base.resolve()))
    except ValueError:
        return str(path.resolve())


def cmd_generate(args) -> dict:
    spec = EnsembleSpec.load(args.ensemble)
    ens = Ensemble.from_spec(spec)
    if args.mr is not None:
        mrs = [args.mr]
    elif args.mrs is not None:
        mrs = [l for l in Path(args.mrs).read_text("utf-8").splitlines() if l.strip()]
    else:
        raise errors.ConfigError("give --mr or --mrs")
    texts, results, last = [], [], None
    for raw in mrs:
        text, last = generate(ens, raw, args.dialect)
        texts.append(text)
        results.append({"mr": raw, "output": text, **last.to_dict()})
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text("".join(t + "\n" for t in texts), encoding="utf-8")
    out = {"mrs": len(mrs), "pool_size": sum(len(r["ranked"]) for r in results)}
    if len(texts) == 1:
        out["output"] = texts[0]
        w = results[0]["ranked"][0]
        out.update(s_align=w["s_align"], final_score=w["final_score"], source_model=w["source_model"])
    fig = _figure(args, "plot_rerank", last, name="generate_rerank") if len(mrs) == 1 else None
    _write_report(args, "generate", {"summary": out, "results": results, "figures": [fig] if fig else []})
    return out


def cmd_evaluate(args) -> dict:
    pairs = read_eval_files(args.hyp, args.ref, args.mr, args.dialect)
    gaz = None
    if args.mr:
        gaz = Gazetteer.load(args.gazetteer) if args.gazetteer else default_gazetteer(
            delex_slots=())
    report = evaluate(pairs, gaz, bleu_smooth=args.smooth)
    for line in report.as_lines():
        print(line)
    d = report.as_dict()
    fig = _figure(args, "plot_metrics", d, name="evaluate_metrics")
    _write_report(args, "evaluate", {**d, "figures": [fig] if fig else []})
    return {}


def cmd_synth(args) -> dict:
    grammar = SyntheticGrammar()
    exclude = set()
    if args.exclude:
        exclude = {s.mr.key() for s in load_dataset(args.exclude, "e2e", _split_of(args.exclude))}
    ds = gen_synthetic(grammar, args.size, args.seed, exclude, split=args.split_name or "train")
    save_dataset(ds, args.out)
    out = {"samples": len(ds), "unique_mrs": len(ds.group_by_mr()), "seed": args.seed, "output": args.out}
    _write_report(args, "synth", out)
    return out


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlgen", description="Data-to-text generation pipeline.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True, multi=False):
        if data:
            if multi:
                sp.add_argument("--data", required=True, nargs="+", help="dataset file(s)")
            else:
                sp.add_argument("--data", required=True, help="dataset file")
        sp.add_argument("--dialect", default="e2e", choices=["e2e", "rnnlg"])
        sp.add_argument("--domain", default=None, choices=["e2e", "tv", "laptop", "synthetic"])
        sp.add_argument("--config", help="run configuration (JSON)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out-dir", help="directory for the JSON report and figures")
        sp.add_argument("--no-figures", action="store_true")
        return sp

    sp = common(sub.add_parser("stats", help="corpus statistics"), multi=True)
    sp.set_defaults(func=cmd_stats, split_name=None)

    sp = common(sub.add_parser("align", help="slot alignment report"), data=False)
    sp.add_argument("--data")
    sp.add_argument("--mr")
    sp.add_argument("--utterance")
    sp.add_argument("--gazetteer")
    sp.add_argument("--save-gazetteer")
    sp.set_defaults(func=cmd_align, split_name=None)

    sp = common(sub.add_parser("preprocess", help="delexicalize a dataset"))
    sp.add_argument("--policy", help="delexicalization policy (JSON)")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_preprocess, split_name=None)

    sp = common(sub.add_parser("augment", help="split and/or permute training samples"))
    sp.add_argument("--split", action="store_true", help="add sentence-level sub-samples")
    sp.add_argument("--permute", type=int, default=0, metavar="K", help="add K slot orderings")
    sp.add_argument("--gazetteer")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_augment, split_name=None)

    sp = common(sub.add_parser("select", help="keep the most elaborate references"))
    sp.add_argument("--top-n", type=float)
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_select, split_name=None)

    sp = common(sub.add_parser("train", help="train one submodel"))
    sp.add_argument("--valid")
    sp.add_argument("--encoder", choices=["bilstm", "cnn_pooling"])
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--embed", type=int)
    sp.add_argument("--hidden", type=int)
    sp.add_argument("--layers", type=int)
    sp.add_argument("--alpha", type=float, help="length penalty used at decoding time")
    sp.add_argument("--name", help="submodel label in the ensemble")
    sp.add_argument("--add-to-ensemble", metavar="SPEC", help="append the checkpoint to an ensemble spec")
    sp.add_argument("--out", required=True, help="checkpoint directory")
    sp.set_defaults(func=cmd_train, split_name=None)

    sp = common(sub.add_parser("generate", help="generate with a reranked ensemble"), data=False)
    sp.add_argument("--ensemble", required=True)
    sp.add_argument("--mr")
    sp.add_argument("--mrs", help="file with one MR per line")
    sp.add_argument("--out", help="write outputs one per line")
    sp.set_defaults(func=cmd_generate)

    sp = common(sub.add_parser("evaluate", help="automatic metrics"), data=False)
    sp.add_argument("--hyp", required=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--mr")
    sp.add_argument("--gazetteer")
    sp.add_argument("--smooth", action="store_true", help="smoothed BLEU")
    sp.set_defaults(func=cmd_evaluate)

    sp = common(sub.add_parser("synth", help="synthetic corpus"), data=False)
    sp.add_argument("--size", type=int, default=1000)
    sp.add_argument("--exclude", help="dataset whose MRs must not be reused")
    sp.add_argument("--split-name", choices=["train", "validation", "test"])
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth, seed=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "synth" and args.seed is None:
        args.seed = 0
    try:
        _emit(args.func(args))
    except Exception as exc:
        for cls, code in EXIT_CODES:
            if isinstance(exc, cls):
                print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
                return code
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
