"""Data-to-text generation from meaning representations.

Corpus handling, delexicalization, heuristic slot alignment, training-data
augmentation and selection, a numpy encoder-decoder with beam search, an
alignment-reranked ensemble, and automatic evaluation metrics.
"""

__version__ = "0.1.0"
