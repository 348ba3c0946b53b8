import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlgen.aligner import Gazetteer, align_utterance, build_gazetteer, label_coreference
from nlgen.corpus import Dataset, MeaningRepresentation, Sample, SlotValue, parse_mr
from nlgen.synthetic import DEFAULT_VALUES

from conftest import read_jsonl


def fixture_scores(gaz):
    """Slot-level precision/recall over aligned (slot, sentence) pairs and error labels."""
    tp = fp = fn = 0
    for row in read_jsonl("aligner_gold.jsonl"):
        rep = align_utterance(row["utterance"], parse_mr(row["mr"]), gaz)
        pred = {(s, i) for i, slots in rep.per_sentence for s in slots}
        pred |= {("U", s) for s in rep.unaligned_slots}
        pred |= {("O", s) for s, _ in rep.overgenerated}
        gold = {(s, i) for s, i in row["aligned"].items()}
        gold |= {("U", s) for s in row.get("unaligned", [])}
        gold |= {("O", s) for s in row["overgenerated"]}
        tp += len(pred & gold)
        fp += len(pred - gold)
        fn += len(gold - pred)
    return tp, fp, fn


def f1(tp, fp, fn):
    return 2 * tp / (2 * tp + fp + fn)


class TestFixture:
    def test_f1(self, gaz):
        assert f1(*fixture_scores(gaz)) >= 0.95

    def test_fixture_size(self):
        assert len(read_jsonl("aligner_gold.jsonl")) == 50


class TestAlign:
    def test_all_aligned(self, gaz):
        mr = parse_mr("name[The Eagle], eatType[pub], food[Italian], area[riverside]")
        rep = align_utterance("The Eagle is an Italian pub. It is by the river.", mr, gaz)
        assert rep.unaligned_slots == [] and rep.overgenerated == []
        assert rep.sentence_of("area") == 1 and rep.sentence_of("food") == 0

    def test_missing_slot(self, gaz):
        mr = parse_mr("name[Aromi], familyFriendly[yes], food[Chinese]")
        rep = align_utterance("Aromi serves Chinese food.", mr, gaz)
        assert rep.unaligned_slots == ["familyfriendly"]

    def test_overgenerated_slot(self, gaz):
        mr = parse_mr("name[Aromi], food[Chinese]")
        rep = align_utterance("Aromi is a cheap Chinese restaurant.", mr, gaz)
        assert sorted(s for s, _ in rep.overgenerated) == ["eattype", "pricerange"]

    def test_negation_flips_boolean(self, gaz):
        mr = parse_mr("name[Aromi], familyFriendly[yes]")
        rep = align_utterance("Aromi is not family friendly.", mr, gaz)
        assert rep.unaligned_slots == ["familyfriendly"]
        rep = align_utterance("Aromi is not family friendly.", parse_mr("name[Aromi], familyFriendly[no]"), gaz)
        assert rep.unaligned_slots == []

    def test_placeholder_counts_as_realization(self, gaz):
        mr = parse_mr("name[slot_name], near[slot_near]")
        rep = align_utterance("slot_name is near slot_near.", mr, gaz)
        assert rep.n_unaligned == 0

    def test_wrong_value_not_aligned(self, gaz):
        rep = align_utterance("Aromi is cheap.", parse_mr("name[Aromi], priceRange[high]"), gaz)
        assert rep.unaligned_slots == ["pricerange"]

    def test_observed_phrases(self):
        train = Dataset((Sample(parse_mr("name[X], food[Thai]"), "X serves Thai food.", "0"),))
        gaz = build_gazetteer(train)
        assert "thai" in gaz.phrases_for("food")

    def test_gazetteer_save_load(self, gaz, tmp_path):
        gaz.save(tmp_path / "g.json")
        back = Gazetteer.load(tmp_path / "g.json")
        mr = parse_mr("name[Aromi], food[Chinese], area[riverside]")
        utt = "Aromi serves cheap Chinese food in the city centre."
        a, b = align_utterance(utt, mr, gaz), align_utterance(utt, mr, back)
        assert (a.unaligned_slots, a.overgenerated) == (b.unaligned_slots, b.overgenerated)


class TestCoreference:
    def test_pronoun(self):
        assert label_coreference("It is cheap.", "Aromi")

    def test_name(self):
        assert label_coreference("Go to Blue Spice today.", "Blue Spice")

    def test_neither(self):
        assert not label_coreference("Prices are low.", "Aromi")


# random MR/utterance pairs: the utterance mixes values of arbitrary slots
_SLOTS = sorted(DEFAULT_VALUES)
_WORDS = ["is", "a", "not", "near", "the", "and", "it", "food", "rated", "kids", "."]


@st.composite
def mr_and_utterance(draw):
    chosen = draw(st.lists(st.sampled_from(_SLOTS), min_size=1, max_size=len(_SLOTS), unique=True))
    mr = MeaningRepresentation("inform", tuple(
        SlotValue(s, draw(st.sampled_from(DEFAULT_VALUES[s]))) for s in chosen))
    parts = draw(st.lists(st.one_of(
        st.sampled_from(_WORDS),
        st.sampled_from(_SLOTS).flatmap(lambda s: st.sampled_from(DEFAULT_VALUES[s]))),
        max_size=25))
    return mr, " ".join(parts)


@settings(max_examples=500, deadline=None)
@given(mr_and_utterance())
def test_conservation(gaz, pair):
    mr, utt = pair
    rep = align_utterance(utt, mr, gaz)
    assert len(rep.aligned_slots) + rep.n_unaligned == rep.total_slots == len(mr)
    assert set(rep.unaligned_slots) <= set(mr.slot_names)
    assert not {s for s, _ in rep.overgenerated} & set(mr.slot_names)
