import json

import pytest

from nlgen.config import RunConfig
from nlgen.delex import DelexPolicy
from nlgen.errors import ConfigError


def write(tmp_path, d, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


class TestRunConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert cfg.policy() == DelexPolicy.default("e2e")
        assert cfg.hyperparams.embed_dim == 32

    def test_round_trip(self, tmp_path):
        (tmp_path / "data.csv").write_text("mr,ref\n")
        d = {"version": 1, "seed": 9, "domain": "laptop", "paths": {"data": "data.csv", "output": "out"},
             "hyperparams": {"encoder": "cnn_pooling", "epochs": 3},
             "delex_policy": {"delex_slots": ["name"], "excluded_slots": ["area"]},
             "split": {"position_slot_name": "pos"}, "permutation": {"k": 2, "seed": 1},
             "selection": {"top_n": 2}, "ensemble": "ens.json"}
        cfg = RunConfig.load(write(tmp_path, d))
        assert cfg.seed == 9 and cfg.hyperparams.encoder == "cnn_pooling"
        assert cfg.path("data") == tmp_path / "data.csv"
        again = RunConfig.from_dict(json.loads(cfg.dumps()), tmp_path)
        assert again.to_dict() == cfg.to_dict()

    @pytest.mark.parametrize("d", [
        {"seed": 1},
        {"version": 2},
        {"version": 1, "colour": "red"},
        {"version": 1, "paths": {"weights": "x"}},
        {"version": 1, "hyperparams": {"depth": 4}},
        {"version": 1, "split": {"pronoun": ["it"]}},
        {"version": 1, "selection": {"mode": "random"}},
        {"version": 1, "delex_policy": {"delex_slots": ["name"], "colour": 1}},
        {"version": 1, "paths": {"data": "missing.csv"}},
    ])
    def test_invalid(self, tmp_path, d):
        with pytest.raises(ConfigError):
            RunConfig.load(write(tmp_path, d))

    def test_unreadable(self, tmp_path):
        (tmp_path / "bad.json").write_text("{")
        with pytest.raises(ConfigError):
            RunConfig.load(tmp_path / "bad.json")

    def test_root_env(self, tmp_path, monkeypatch):
        (tmp_path / "root").mkdir()
        (tmp_path / "root" / "d.csv").write_text("")
        monkeypatch.setenv("NLGEN_ROOT", str(tmp_path / "root"))
        cfg = RunConfig.load(write(tmp_path, {"version": 1, "paths": {"data": "d.csv"}}))
        assert cfg.path("data") == tmp_path / "root" / "d.csv"
