import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlgen.corpus import Dataset, Sample, normalize_text, parse_mr
from nlgen.delex import (PLACEHOLDER_RE, DelexPolicy, PlaceholderToken, delexicalize,
                         delexicalize_mr, infer_delex_slots, is_placeholder, parse_placeholder,
                         placeholder_for, relexicalize)
from nlgen.errors import ConfigError, NotDelexicalizable
from nlgen.synthetic import SyntheticGrammar, realize, sample_mr


@pytest.fixture(scope="module")
def policy():
    return DelexPolicy.default("e2e")


class TestPlaceholders:
    def test_plain(self, policy):
        assert placeholder_for("name", "The Eagle", policy).surface == "slot_name"

    def test_article_features(self):
        pol = DelexPolicy(frozenset({"food"}), cuisine_lexicon=frozenset({"italian"}))
        assert placeholder_for("food", "Italian", pol).surface == "slot_vow_cuisine_food"
        assert placeholder_for("food", "pasta", pol).surface == "slot_con_food"

    def test_features_disabled(self):
        pol = DelexPolicy(frozenset({"food"}), article_feature_enabled=False)
        assert placeholder_for("food", "Italian", pol).surface == "slot_food"

    def test_plural(self):
        pol = DelexPolicy(frozenset({"accessories"}), article_slots=frozenset({"accessories"}),
                          plural_slots=frozenset({"accessories"}))
        assert placeholder_for("accessories", "remotes", pol).plural_feature

    def test_not_delexicalizable(self, policy):
        with pytest.raises(NotDelexicalizable):
            placeholder_for("area", "riverside", policy)

    def test_overlap_rejected(self):
        with pytest.raises(ConfigError):
            DelexPolicy(frozenset({"name"}), excluded_slots=frozenset({"name"}))

    @given(st.sampled_from(["name", "near", "food", "customer_rating"]),
           st.sampled_from([None, True, False]), st.booleans(), st.booleans())
    def test_parse_inverts_surface(self, slot, vowel, cuisine, plural):
        tok = PlaceholderToken(slot, vowel, cuisine, plural)
        assert parse_placeholder(tok.surface) == tok
        assert is_placeholder(tok.surface)

    def test_parse_rejects_words(self):
        with pytest.raises(ValueError):
            parse_placeholder("slotted")


class TestDelexicalize:
    def test_substitution(self, policy):
        s = Sample(parse_mr("name[The Eagle], near[Burger King], area[riverside]"),
                   "The Eagle is near Burger King by the riverside.", "0")
        d = delexicalize(s, policy)
        assert d.delex_utterance == "slot_name is near slot_near by the riverside."
        assert d.delex_mr.get("name") == "slot_name" and d.delex_mr.get("area") == "riverside"
        assert d.unsubstituted == []

    def test_missing_value_recorded(self, policy):
        s = Sample(parse_mr("name[Zizzi], near[Avalon]"), "Zizzi is a pub.", "0")
        assert delexicalize(s, policy).unsubstituted == ["near"]

    def test_word_boundaries(self, policy):
        s = Sample(parse_mr("name[Bar]"), "Bar is not a Barista.", "0")
        assert delexicalize(s, policy).delex_utterance == "slot_name is not a Barista."

    def test_longest_span_wins(self, policy):
        s = Sample(parse_mr("name[The Mill], near[The Mill House]"), "The Mill is by The Mill House.", "0")
        assert delexicalize(s, policy).delex_utterance == "slot_name is by slot_near."

    def test_sentinel_values_untouched(self, policy):
        mr = parse_mr("name[dontcare], near[Avalon]")
        assert delexicalize_mr(mr, policy).get("name") == "dontcare"

    def test_relex_orphans(self):
        text, orphans = relexicalize("slot_name is near slot_near.", parse_mr("name[Aromi]"))
        assert text == "Aromi is near slot_near." and orphans == ["slot_near"]

    def test_infer_delex_slots(self):
        rows = [("name[A%d], area[riverside]" % i, "A%d is nice." % i) for i in range(5)]
        ds = Dataset(tuple(Sample(parse_mr(m), r, str(i)) for i, (m, r) in enumerate(rows)))
        assert infer_delex_slots(ds) == frozenset({"name"})


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_relex_inverts_delex_on_synthetic(seed):
    rng = np.random.default_rng(seed)
    grammar = SyntheticGrammar()
    mr = sample_mr(grammar, rng)
    ref = realize(mr, grammar, rng)
    policy = DelexPolicy.default("e2e")
    d = delexicalize(Sample(mr, ref, "x"), policy)
    text, orphans = relexicalize(d.delex_utterance, mr, policy)
    assert orphans == []
    assert not PLACEHOLDER_RE.search(text)
    assert normalize_text(text) == normalize_text(ref)
