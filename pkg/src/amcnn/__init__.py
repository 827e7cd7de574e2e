"""Attention-based multichannel CNN sentence classifier, numpy only.

A bidirectional LSTM encodes each sentence, several attention channels
rescale the encoded positions into feature-map "images", and per-width
convolution banks with max-over-time pooling feed a softmax classifier.
Gradients come from a small reverse-mode tape in :mod:`amcnn.tensor`.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigError, DimensionError, FormatError
from .model import AttentionRecord, ModelConfig, ModelParams, forward, init_params
from .tensor import Tape, Tensor, backward
from .text import EncodedBatch, Vocabulary, build_vocab, encode_dataset, load_dataset, tokenize
from .train import TrainConfig, evaluate, grad_check, model_grad_check, predict_probs, train

__version__ = "0.1.0"

__all__ = [
    "AttentionRecord",
    "ConfigError",
    "DimensionError",
    "EncodedBatch",
    "FormatError",
    "ModelConfig",
    "ModelParams",
    "Tape",
    "Tensor",
    "TrainConfig",
    "Vocabulary",
    "backward",
    "build_vocab",
    "encode_dataset",
    "evaluate",
    "forward",
    "grad_check",
    "init_params",
    "load_checkpoint",
    "load_dataset",
    "model_grad_check",
    "predict_probs",
    "save_checkpoint",
    "tokenize",
    "train",
]
