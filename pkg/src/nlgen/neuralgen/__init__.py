"""Numpy encoder-decoder generator: model, training, decoding, checkpoints."""

from nlgen.neuralgen.beam import Hypothesis, beam_search, decode, greedy, length_penalty
from nlgen.neuralgen.checkpoint import load_checkpoint, save_checkpoint
from nlgen.neuralgen.gradcheck import grad_check
from nlgen.neuralgen.model import Hyperparams, Seq2Seq, Vocab, init_params, param_shapes
from nlgen.neuralgen.train import TrainingLog, linearize_mr, train

__all__ = [
    "Hyperparams", "Hypothesis", "Seq2Seq", "TrainingLog", "Vocab", "beam_search", "decode",
    "grad_check", "greedy", "init_params", "length_penalty", "linearize_mr", "load_checkpoint",
    "param_shapes", "save_checkpoint", "train",
]
