"""Training loop, evaluation, and the finite-difference gradient checker."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import FormatError
from .model import ModelConfig, ModelParams, forward, init_params
from .optim import adam_step, init_adam
from .tensor import Tape, backward
from .text import (EncodedBatch, Vocabulary, build_vocab, encode_dataset,
                   init_embeddings, max_sentence_length, tokenize)

REL_ERROR_FLOOR = 1e-6


@dataclass
class TrainConfig:
    batch_size: int = 50
    epochs: int = 25
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    min_freq: int = 1
    target_dev_accuracy: float = 0.0    # > 0: stop once dev accuracy reaches it


def check_labels(examples: list, classes: int, origin: str) -> None:
    for label, _ in examples:
        if not 0 <= label < classes:
            raise FormatError(
                f"{origin}: label {label} outside [0, {classes}); "
                f"adjust the classes setting")


def train(config: ModelConfig, train_examples: list, dev_examples: list,
          train_config: TrainConfig | None = None,
          pretrained: dict | None = None) -> tuple:
    """Fit on (label, text) pairs; returns (params, metrics, vocab) with the
    parameters rolled back to the best dev-accuracy epoch.

    One master seed fans out into independent streams for embedding draws,
    parameter draws, shuffling, and forward-pass stochasticity, so a rerun
    with the same seed is bit-identical.  Metrics carry one entry per epoch
    actually run; a target_dev_accuracy early stop can end the loop before
    the configured epoch count.
    """
    tc = train_config or TrainConfig()
    if not train_examples:
        raise ValueError("train: no training examples")
    check_labels(train_examples, config.classes, "train data")
    check_labels(dev_examples, config.classes, "dev data")

    vocab = build_vocab([tokenize(text) for _, text in train_examples], tc.min_freq)
    length = config.max_length or max_sentence_length(train_examples)
    config = replace(config, max_length=length)
    config.validate()

    embed_rng, param_rng, shuffle_rng, stoch_rng = [
        np.random.Generator(np.random.PCG64(s))
        for s in np.random.SeedSequence(config.seed).spawn(4)]
    embedding = init_embeddings(vocab, config.embedding_dim, pretrained, embed_rng)
    params = init_params(config, len(vocab), param_rng, embedding=embedding)

    train_batch = encode_dataset(train_examples, vocab, length)
    dev_batch = encode_dataset(dev_examples, vocab, length)

    named = params.named_tensors()
    state = init_adam(named)
    metrics = []
    best_acc = -1.0
    best_data = None
    n = len(train_batch)

    for epoch in range(1, tc.epochs + 1):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, tc.batch_size):
            sel = order[start:start + tc.batch_size]
            sub = EncodedBatch(train_batch.ids[sel], train_batch.pad_mask[sel],
                               train_batch.labels[sel])
            with Tape() as tape:
                loss, _, _ = forward(sub, params, config, stoch_rng, training=True)
                backward(loss, tape)
            adam_step(named, state, lr=tc.learning_rate, beta1=tc.beta1,
                      beta2=tc.beta2, eps=tc.eps)
            params.zero_grads()
            epoch_loss += loss.item() * len(sel)
        dev_acc = evaluate(params, dev_batch, config) if len(dev_batch) else 0.0
        metrics.append({"epoch": epoch, "train_loss": epoch_loss / n,
                        "dev_accuracy": dev_acc})
        if dev_acc >= best_acc:
            best_acc = dev_acc
            best_data = [t.data.copy() for _, t in named]
        if tc.target_dev_accuracy > 0 and dev_acc >= tc.target_dev_accuracy:
            break

    if best_data is not None:
        for (_, t), saved in zip(named, best_data):
            t.data[...] = saved
    return params, metrics, vocab


def predict_probs(params: ModelParams, batch: EncodedBatch,
                  config: ModelConfig) -> np.ndarray:
    """Deterministic class probabilities, batch x classes."""
    _, probs, _ = forward(batch, params, config, None, training=False)
    return probs


def evaluate(params: ModelParams, batch: EncodedBatch,
             config: ModelConfig) -> float:
    """Fraction of argmax-correct predictions; pure in (params, data)."""
    if len(batch) == 0:
        return 0.0
    probs = predict_probs(params, batch, config)
    return float(np.mean(np.argmax(probs, axis=1) == batch.labels))


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise |a-b| / max(|a|, |b|, floor); the floor keeps the
    measure meaningful when both gradients are near zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), REL_ERROR_FLOOR)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def grad_check(loss_fn, named: list, eps: float = 1e-5,
               tol: float = 1e-4) -> dict:
    """Compare tape gradients of loss_fn() against central differences.

    loss_fn must be deterministic and read the tensors in ``named`` by
    reference; returns per-parameter max relative errors plus a verdict.
    """
    with Tape() as tape:
        backward(loss_fn(), tape)
    grads = {name: (t.grad.copy() if t.grad is not None else np.zeros(t.shape))
             for name, t in named}
    for _, t in named:
        t.zero_grad()

    report = {}
    for name, t in named:
        flat = t.data.reshape(-1)
        fd = np.zeros(flat.size)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            hi = loss_fn().item()
            flat[idx] = orig - eps
            lo = loss_fn().item()
            flat[idx] = orig
            fd[idx] = (hi - lo) / (2.0 * eps)
        report[name] = relative_error(fd, grads[name].reshape(-1))
    worst = max(report.values()) if report else 0.0
    return {"per_parameter": report, "max_error": worst, "tolerance": tol,
            "passed": worst <= tol}


def model_grad_check(params: ModelParams, batch: EncodedBatch,
                     config: ModelConfig, eps: float = 1e-5,
                     tol: float = 1e-4) -> dict:
    """Gradient-check the full model loss on one batch (evaluation path:
    dropout off, channel masks at their expectation)."""
    return grad_check(lambda: forward(batch, params, config, None, False)[0],
                      params.named_tensors(), eps=eps, tol=tol)


def smooth_start(params: ModelParams, bias: float = 0.25) -> None:
    """Shift conv biases into the relu-active region before a gradient
    check.  Freshly drawn filters leave pre-activations near zero, where
    the +-eps probes straddle the relu kink (and max-pool near-ties) and
    central differences stop describing the one-sided tape gradient."""
    for f in params.filters:
        f.bias.data[...] = bias
