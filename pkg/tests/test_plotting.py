from nlgen import plotting
from nlgen.corpus import compute_stats
from nlgen.ensemble import Candidate, rerank
from nlgen.corpus import parse_mr
from nlgen.neuralgen.train import TrainingLog
from nlgen.synthetic import gen_synthetic

PNG = b"\x89PNG"


def test_figures_are_png(tmp_path, gaz):
    stats = compute_stats(gen_synthetic(size=50, seed=0))
    log = TrainingLog(epochs=[{"epoch": 0, "train_loss": 3.0}, {"epoch": 1, "train_loss": 2.0,
                                                                  "valid_loss": 2.5}])
    pool = [Candidate(("slot_name", "is", "a", "pub", "."), -1.0, -0.5, "m", 0),
            Candidate(("slot_name", "."), -0.5, -0.4, "m", 1)]
    result = rerank(pool, parse_mr("name[A], eatType[pub]"), gaz)
    paths = [
        plotting.plot_slot_histogram(stats, tmp_path / "a.png"),
        plotting.plot_sentences_by_slots(stats, tmp_path / "b.png"),
        plotting.plot_training_log(log, tmp_path / "c.png"),
        plotting.plot_metrics({"bleu": 0.5, "nist": 3.0, "meteor_lite": 0.4, "rouge_l": 0.6,
                               "err": 0.01}, tmp_path / "d.png"),
        plotting.plot_rerank(result, tmp_path / "e.png"),
        plotting.plot_selection_scores([0.0, 1.0, 2.5, -1.0], tmp_path / "f.png"),
    ]
    for p in paths:
        assert p.read_bytes()[:4] == PNG


def test_figures_are_reproducible(tmp_path):
    stats = compute_stats(gen_synthetic(size=50, seed=0))
    a = plotting.plot_slot_histogram(stats, tmp_path / "a.png").read_bytes()
    b = plotting.plot_slot_histogram(stats, tmp_path / "b.png").read_bytes()
    assert a == b
