"""Template grammar producing restaurant-domain MR/reference pairs.

Every realization mentions each MR slot exactly once and nothing else the
aligner would recognize, so gold references have zero slot error.  Used for
desk-scale training and acceptance runs where the real corpus is absent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from nlgen.corpus import Dataset, MeaningRepresentation, Sample, SlotValue
from nlgen.errors import GrammarError

SLOT_ORDER = ("name", "eattype", "food", "pricerange", "customer_rating", "area",
              "familyfriendly", "near")

DEFAULT_VALUES = {
    "name": ("Alimentum", "Aromi", "Bibimbap House", "Blue Spice", "Browns Cambridge", "Clowns",
             "Cotto", "Fitzbillies", "Giraffe", "Green Man", "Loch Fyne", "Midsummer House",
             "Strada", "The Cricketers", "The Eagle", "The Mill", "The Phoenix", "The Plough",
             "The Punter", "The Vaults", "The Waterman", "Wildwood", "Zizzi", "The Twenty Two"),
    "eattype": ("coffee shop", "pub", "restaurant"),
    "food": ("Chinese", "English", "Fast food", "French", "Indian", "Italian", "Japanese"),
    "pricerange": ("cheap", "moderate", "high", "less than £20", "£20-25", "more than £30"),
    "customer_rating": ("low", "average", "high", "1 out of 5", "3 out of 5", "5 out of 5"),
    "area": ("city centre", "riverside"),
    "familyfriendly": ("yes", "no"),
    "near": ("Avalon", "Clare Hall", "The Bakers", "The Sorrento", "The Six Bells",
             "Crowne Plaza Hotel", "The Portland Arms", "Ranch", "The Rice Boat",
             "Caffe Nero", "Trinity College", "The Bridge"),
}

# share of MRs with 3, 4, ..., 8 slots
DEFAULT_SLOT_COUNTS = {3: 0.05, 4: 0.18, 5: 0.32, 6: 0.28, 7: 0.14, 8: 0.03}

# Predicate realizations, used after a subject ("X serves ...", "It is ...").
PREDICATES = {
    "food": ("serves {food} food", "offers {food} food", "provides {food} food"),
    "pricerange": {
        "cheap": ("has cheap prices", "is cheaply priced", "is low-priced"),
        "moderate": ("is moderately priced", "has moderate prices", "is mid-priced"),
        "high": ("is expensive", "has high prices", "is high-priced"),
        "less than £20": ("has a price range of less than £20", "costs less than £20"),
        "£20-25": ("has a price range of £20-25", "costs £20-25 per head"),
        "more than £30": ("has a price range of more than £30", "costs more than £30"),
    },
    "customer_rating": {
        "low": ("has a low customer rating", "is poorly rated"),
        "average": ("has an average customer rating", "is average rated"),
        "high": ("has a high customer rating", "is highly rated"),
        "1 out of 5": ("has a customer rating of 1 out of 5", "is rated 1 out of 5"),
        "3 out of 5": ("has a customer rating of 3 out of 5", "is rated 3 out of 5"),
        "5 out of 5": ("has a customer rating of 5 out of 5", "is rated 5 out of 5"),
    },
    "area": {
        "city centre": ("is located in the city centre", "is in the city centre"),
        "riverside": ("is located in the riverside area", "is by the riverside"),
    },
    "familyfriendly": {
        "yes": ("is family friendly", "is kid friendly", "welcomes children"),
        "no": ("is not family friendly", "is not kid friendly", "is adults only"),
    },
    "near": ("is near {near}", "is located near {near}", "is close to {near}"),
}

# Pre-nominal modifiers for the opening sentence ("a cheap Italian pub").
ADJECTIVES = {
    "pricerange": {"cheap": "cheap", "moderate": "moderately priced", "high": "expensive"},
    "food": None,          # the cuisine itself
    "familyfriendly": {"yes": "family friendly", "no": None},
}

HEADS_WITHOUT_EATTYPE = ("place", "venue")
CONTRAST_SLOTS = {"familyfriendly": "no", "customer_rating": "low"}


@dataclass
class SyntheticGrammar:
    values: dict = field(default_factory=lambda: {k: tuple(v) for k, v in DEFAULT_VALUES.items()})
    slot_counts: dict = field(default_factory=lambda: dict(DEFAULT_SLOT_COUNTS))
    refs_per_mr: tuple[int, int] = (1, 3)      # inclusive range of references per MR
    contrast_prob: float = 0.3
    domain: str = "e2e"

    def validate(self) -> None:
        if "name" not in self.values:
            raise GrammarError("grammar needs a name slot")
        for slot in self.values:
            if slot not in SLOT_ORDER:
                raise GrammarError(f"no templates for slot {slot!r}")
            for v in self.values[slot]:
                if slot in ("name", "near", "food", "eattype"):
                    continue
                if v not in PREDICATES[slot]:
                    raise GrammarError(f"no realization for {slot}[{v}]")
        n_slots = len(self.values)
        if not self.slot_counts or min(self.slot_counts) < 1 or max(self.slot_counts) > n_slots:
            raise GrammarError(f"slot counts must lie in [1, {n_slots}]")
        total = sum(self.slot_counts.values())
        if total <= 0 or any(p < 0 for p in self.slot_counts.values()):
            raise GrammarError("slot count weights must be non-negative with positive sum")
        lo, hi = self.refs_per_mr
        if not 1 <= lo <= hi:
            raise GrammarError("refs_per_mr must satisfy 1 <= lo <= hi")


def _article(word: str) -> str:
    return "an" if word[:1].lower() in "aeiou" else "a"


def _pick(rng: np.random.Generator, options):
    return options[int(rng.integers(len(options)))]


def sample_mr(grammar: SyntheticGrammar, rng: np.random.Generator) -> MeaningRepresentation:
    counts = sorted(grammar.slot_counts)
    probs = np.array([grammar.slot_counts[c] for c in counts], dtype=float)
    n = counts[int(rng.choice(len(counts), p=probs / probs.sum()))]
    optional = [s for s in SLOT_ORDER if s in grammar.values and s != "name"]
    chosen = {"name"} | {optional[i] for i in rng.choice(len(optional), n - 1, replace=False)}
    slots = [SlotValue(s, _pick(rng, grammar.values[s])) for s in SLOT_ORDER if s in chosen]
    return MeaningRepresentation("inform", tuple(slots), "e2e")


def _predicate(slot: str, value: str, rng) -> str:
    forms = PREDICATES[slot]
    if isinstance(forms, dict):
        return _pick(rng, forms[value])
    return _pick(rng, forms).format(**{slot: value})


def _join(parts: list[str]) -> str:
    if len(parts) == 1:
        return parts[0]
    return ", ".join(parts[:-1]) + " and " + parts[-1]


def realize(mr: MeaningRepresentation, grammar: SyntheticGrammar, rng: np.random.Generator) -> str:
    """One reference for `mr`; raises GrammarError if a slot cannot be realized."""
    values = {sv.slot: sv.value for sv in mr.slots}
    if "name" not in values:
        raise GrammarError("MR without a name cannot be realized")
    for slot in values:
        if slot not in SLOT_ORDER:
            raise GrammarError(f"no templates for slot {slot!r}")
    rest = [s for s in SLOT_ORDER if s in values and s not in ("name", "eattype")]
    order = list(rng.permutation(rest))

    # opening sentence: "<name> is a <adjectives> <head>"
    adjectives = []
    for slot in ("familyfriendly", "pricerange", "food"):
        if slot in order and rng.random() < 0.5:
            table = ADJECTIVES[slot]
            word = values[slot] if table is None else table.get(values[slot])
            if word:
                adjectives.append(word)
                order.remove(slot)
    head = values.get("eattype") or _pick(rng, HEADS_WITHOUT_EATTYPE)
    noun = " ".join(adjectives + [head])
    opening = f"{values['name']} is {_article(noun)} {noun}"

    # contrast: a negative slot becomes "..., but it <pred>"
    contrast = None
    for slot, neg in CONTRAST_SLOTS.items():
        if slot in order and values[slot] == neg and rng.random() < grammar.contrast_prob:
            contrast = slot
            order.remove(slot)
            break

    preds = [_predicate(s, values[s], rng) for s in order]
    n_sent = 1 if len(preds) <= 1 else int(rng.integers(1, min(3, len(preds)) + 1))
    cut = int(rng.integers(0, len(preds) + 1)) if n_sent > 1 else len(preds)
    first, later = preds[:cut], preds[cut:]
    sentence = opening
    if first:
        sentence += " that " + _join(first)
    if contrast is not None:
        sentence += ", but it " + _predicate(contrast, values[contrast], rng)
    sentences = [sentence + "."]
    if later:
        chunks = np.array_split(np.arange(len(later)), max(1, min(n_sent - 1, len(later))))
        for chunk in chunks:
            if len(chunk):
                subject = _pick(rng, ("It", "The " + head))
                sentences.append(f"{subject} {_join([later[i] for i in chunk])}.")
    return " ".join(sentences)


def gen_synthetic(grammar: SyntheticGrammar | None = None, size: int = 1000, seed: int = 0,
                  exclude_mrs=(), split: str = "train") -> Dataset:
    """`size` samples, deterministic in `seed`; MRs whose key is in `exclude_mrs` are skipped."""
    grammar = grammar or SyntheticGrammar()
    grammar.validate()
    if size < 1:
        raise ValueError("size must be >= 1")
    rng = np.random.default_rng(seed)
    excluded = set(exclude_mrs)
    samples: list[Sample] = []
    tries = 0
    while len(samples) < size:
        tries += 1
        if tries > 100 * size:
            raise GrammarError("could not draw enough MRs outside the excluded set")
        mr = sample_mr(grammar, rng)
        if mr.key() in excluded:
            continue
        lo, hi = grammar.refs_per_mr
        for _ in range(int(rng.integers(lo, hi + 1))):
            if len(samples) == size:
                break
            samples.append(Sample(mr, realize(mr, grammar, rng), f"syn{seed}-{len(samples)}"))
    return Dataset(tuple(samples), grammar.domain, split)
