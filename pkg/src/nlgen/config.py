"""Run configuration: one JSON file with an explicit ``version`` field."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from nlgen.augment import PermutationConfig, SplitConfig
from nlgen.delex import DelexPolicy, load_cuisines
from nlgen.errors import ConfigError
from nlgen.neuralgen.model import Hyperparams
from nlgen.styleselect import SelectionPolicy

CONFIG_VERSION = 1
ROOT_ENV = "NLGEN_ROOT"     # optional root for relative paths

_TOP_KEYS = {"version", "seed", "domain", "paths", "hyperparams", "delex_policy", "split",
             "permutation", "selection", "ensemble"}
_PATH_KEYS = {"data", "checkpoints", "lexicon", "rules", "gazetteer", "output"}


def _check_keys(d: dict, allowed: set, where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass
class RunConfig:
    seed: int = 0
    domain: str = "e2e"
    paths: dict = field(default_factory=dict)
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    delex_policy: DelexPolicy | None = None
    split: SplitConfig = field(default_factory=SplitConfig)
    permutation: PermutationConfig = field(default_factory=PermutationConfig)
    selection: SelectionPolicy = field(default_factory=SelectionPolicy)
    ensemble: str | None = None        # path to an ensemble spec
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    def policy(self) -> DelexPolicy:
        return self.delex_policy or DelexPolicy.default(self.domain)

    def path(self, key: str) -> Path | None:
        p = self.paths.get(key)
        if p is None:
            return None
        p = Path(p)
        if p.is_absolute():
            return p
        root = os.environ.get(ROOT_ENV)
        return (Path(root) if root else self.base_dir) / p

    def to_dict(self) -> dict:
        out = {
            "version": CONFIG_VERSION,
            "seed": self.seed,
            "domain": self.domain,
            "paths": dict(sorted(self.paths.items())),
            "hyperparams": self.hyperparams.to_dict(),
            "split": {"pronouns": list(self.split.pronouns),
                      "position_slot_name": self.split.position_slot_name,
                      "keep_unalignable": self.split.keep_unalignable},
            "permutation": {"k": self.permutation.k, "seed": self.permutation.seed},
            "selection": {"weights": dict(sorted(self.selection.weights.items())),
                          "sentence_penalty": self.selection.sentence_penalty,
                          "mode": self.selection.mode,
                          "top_n": self.selection.top_n,
                          "threshold": self.selection.threshold},
        }
        if self.delex_policy is not None:
            out["delex_policy"] = self.delex_policy.to_dict()
        if self.ensemble is not None:
            out["ensemble"] = self.ensemble
        return out

    @classmethod
    def from_dict(cls, d: dict, base_dir=".", check_paths: bool = True) -> RunConfig:
        _check_keys(d, _TOP_KEYS, "config")
        if d.get("version") != CONFIG_VERSION:
            raise ConfigError(f"config version {d.get('version')!r}, expected {CONFIG_VERSION}")
        paths = dict(d.get("paths", {}))
        _check_keys(paths, _PATH_KEYS, "paths")
        split = dict(d.get("split", {}))
        _check_keys(split, {"pronouns", "position_slot_name", "keep_unalignable"}, "split")
        if "pronouns" in split:
            split["pronouns"] = tuple(split["pronouns"])
        perm = dict(d.get("permutation", {}))
        _check_keys(perm, {"k", "seed"}, "permutation")
        sel = dict(d.get("selection", {}))
        _check_keys(sel, {"weights", "sentence_penalty", "mode", "top_n", "threshold"}, "selection")
        try:
            cfg = cls(
                seed=int(d.get("seed", 0)),
                domain=d.get("domain", "e2e"),
                paths=paths,
                hyperparams=Hyperparams.from_dict(d.get("hyperparams", {})),
                delex_policy=_policy_from(d.get("delex_policy")),
                split=SplitConfig(**split),
                permutation=PermutationConfig(**perm),
                selection=SelectionPolicy(**sel),
                ensemble=d.get("ensemble"),
                base_dir=Path(base_dir),
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        if check_paths:
            for key in paths:
                if key == "output":
                    continue
                p = cfg.path(key)
                if not p.exists():
                    raise ConfigError(f"paths.{key} does not exist: {p}")
        return cfg

    @classmethod
    def load(cls, path, check_paths: bool = True) -> RunConfig:
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(d, path.parent, check_paths)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _policy_from(d) -> DelexPolicy | None:
    if d is None:
        return None
    if isinstance(d, str):
        return DelexPolicy.from_file(d)
    _check_keys(d, {"delex_slots", "excluded_slots", "cuisine_lexicon", "article_feature_enabled",
                    "article_slots", "plural_slots"}, "delex_policy")
    kw = {k: (frozenset(v) if isinstance(v, list) else v) for k, v in d.items()}
    kw.setdefault("cuisine_lexicon", load_cuisines())
    return DelexPolicy(**kw)
