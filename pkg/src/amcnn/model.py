"""Model assembly: configuration, the parameter bundle, and the end-to-end
forward pass from token ids to loss, class probabilities, and exportable
attention weights.

Pipeline per example: embedding lookup -> dropout -> Bi-LSTM -> attention
channels -> dropout -> per-width convolution banks -> max-over-time pooling
-> dropout -> softmax head -> cross-entropy.  Loss over a batch is the mean
example loss plus an L2 penalty on weight matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .attention import (MODES, ScalarAttnParams, VectorialAttnParams,
                        build_channels, init_scalar_attn, init_vectorial_attn)
from .conv import (ClassifierHead, ConvFilter, classify, conv_bank,
                   cross_entropy, init_classifier, init_conv_filter)
from .errors import ConfigError
from .lstm import BiLstmParams, bilstm_encode, init_bilstm_params
from .tensor import (Tensor, add, concat, lookup_rows, max_pool_columns, mul,
                     record)
from .text import EncodedBatch, padded_tokens


@dataclass
class ModelConfig:
    hidden_size: int = 100
    embedding_dim: int = 300
    channels: int = 3
    mode: str = "combined"
    filter_widths: tuple = (3, 4, 5)
    maps_per_width: int = 100
    classes: int = 2
    dropout_embedding: float = 0.5
    dropout_cnn_input: float = 0.5
    dropout_penultimate: float = 0.5
    l2_lambda: float = 0.0005
    keep_probs: tuple = ()          # () -> 0.8 per channel
    attention_hidden: int = 0       # 0 -> twice hidden_size
    attention_sum_axis: int = 0
    max_length: int = 0             # 0 -> longest training sentence
    seed: int = 12345

    def __post_init__(self):
        if isinstance(self.filter_widths, list):
            self.filter_widths = tuple(self.filter_widths)
        if isinstance(self.keep_probs, list):
            self.keep_probs = tuple(self.keep_probs)

    def validate(self) -> None:
        if self.hidden_size < 1 or self.embedding_dim < 1:
            raise ConfigError("hidden_size and embedding_dim must be positive")
        if self.channels < 1:
            raise ConfigError(f"channels must be >= 1, got {self.channels}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.filter_widths or any(w < 1 for w in self.filter_widths):
            raise ConfigError(f"bad filter widths {self.filter_widths}")
        if self.maps_per_width < 1:
            raise ConfigError("maps_per_width must be >= 1")
        if self.classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.classes}")
        for name in ("dropout_embedding", "dropout_cnn_input", "dropout_penultimate"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {rate}")
        if self.l2_lambda < 0:
            raise ConfigError(f"l2_lambda must be >= 0, got {self.l2_lambda}")
        for p in self.effective_keep_probs():
            if not 0.0 < p <= 1.0:
                raise ConfigError(f"keep probability {p} outside (0, 1]")
        if self.attention_sum_axis not in (0, 1):
            raise ConfigError("attention_sum_axis must be 0 or 1")
        if self.max_length < 0 or self.attention_hidden < 0:
            raise ConfigError("max_length and attention_hidden must be >= 0")
        if self.max_length and max(self.filter_widths) > self.max_length:
            raise ConfigError(
                f"max filter width {max(self.filter_widths)} exceeds "
                f"sentence length {self.max_length}")

    def effective_keep_probs(self) -> tuple:
        if self.keep_probs:
            if len(self.keep_probs) != self.channels:
                raise ConfigError(
                    f"{len(self.keep_probs)} keep probabilities for "
                    f"{self.channels} channels")
            return self.keep_probs
        return (0.8,) * self.channels

    def effective_attention_hidden(self) -> int:
        return self.attention_hidden or 2 * self.hidden_size

    def feature_count(self) -> int:
        return self.maps_per_width * len(self.filter_widths)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AttentionRecord:
    """Per-sentence export: aligned token strings (pads included and
    flagged), one weight list per channel, and the model's prediction."""

    tokens: list
    pads: list
    channels: list
    predicted: int
    label: int | None = None


@dataclass
class ModelParams:
    embedding: Tensor
    encoder: BiLstmParams
    scalar_attn: list
    vectorial_attn: list
    filters: list
    head: ClassifierHead

    def named_tensors(self) -> list:
        """(name, tensor) pairs in the canonical checkpoint order."""
        out = [("embedding", self.embedding)]
        for tag, direction in (("lstm_fwd", self.encoder.forward),
                               ("lstm_bwd", self.encoder.backward)):
            for gate in ("W_f", "W_i", "W_o", "W_C", "b_f", "b_i", "b_o", "b_C"):
                out.append((f"{tag}.{gate}", getattr(direction, gate)))
        for l, p in enumerate(self.scalar_attn):
            out.append((f"attn{l}.bilinear", p.bilinear))
            out.append((f"attn{l}.bias", p.bias))
        for l, p in enumerate(self.vectorial_attn):
            out.append((f"vec{l}.proj_in", p.proj_in))
            out.append((f"vec{l}.proj_out", p.proj_out))
            out.append((f"vec{l}.bias", p.bias))
        for i, f in enumerate(self.filters):
            out.append((f"filter{i}.weights", f.weights))
            out.append((f"filter{i}.bias", f.bias))
        out.append(("head.weights", self.head.weights))
        out.append(("head.bias", self.head.bias))
        return out

    def l2_tensors(self) -> list:
        """Weight matrices subject to the L2 penalty: everything except
        biases and the embedding table."""
        out = []
        for direction in (self.encoder.forward, self.encoder.backward):
            out += [direction.W_f, direction.W_i, direction.W_o, direction.W_C]
        out += [p.bilinear for p in self.scalar_attn]
        for p in self.vectorial_attn:
            out += [p.proj_in, p.proj_out]
        out += [f.weights for f in self.filters]
        out.append(self.head.weights)
        return out

    def zero_grads(self) -> None:
        for _, t in self.named_tensors():
            t.zero_grad()

    def filters_by_width(self) -> dict:
        grouped = {}
        for f in self.filters:
            grouped.setdefault(f.width, []).append(f)
        return grouped


def init_params(config: ModelConfig, vocab_size: int, rng: np.random.Generator,
                embedding: np.ndarray | None = None) -> ModelParams:
    """Draw all trainable weights; pass a prebuilt embedding matrix to use
    pretrained vectors."""
    config.validate()
    if embedding is None:
        embedding = rng.uniform(-0.25, 0.25, size=(vocab_size, config.embedding_dim))
    if embedding.shape != (vocab_size, config.embedding_dim):
        raise ConfigError(
            f"embedding shape {embedding.shape} != "
            f"{(vocab_size, config.embedding_dim)}")
    width = 2 * config.hidden_size
    keep = config.effective_keep_probs()
    filters = [init_conv_filter(w, width, config.channels, rng)
               for w in config.filter_widths
               for _ in range(config.maps_per_width)]
    return ModelParams(
        embedding=Tensor(embedding, requires_grad=True),
        encoder=init_bilstm_params(config.hidden_size, config.embedding_dim, rng),
        scalar_attn=[init_scalar_attn(width, keep[l], rng)
                     for l in range(config.channels)],
        vectorial_attn=[init_vectorial_attn(width, config.effective_attention_hidden(), rng)
                        for _ in range(config.channels)],
        filters=filters,
        head=init_classifier(config.classes, config.feature_count(), rng))


def assemble_params(config: ModelConfig, vocab_size: int) -> ModelParams:
    """Zero-valued parameter bundle with the right shapes (checkpoint loading)."""
    rng = np.random.default_rng(0)
    params = init_params(config, vocab_size, rng)
    for _, t in params.named_tensors():
        t.data[...] = 0.0
    return params


def apply_dropout(t: Tensor, rate: float, rng: np.random.Generator | None,
                  training: bool) -> Tensor:
    """Inverted dropout: zero with probability rate, scale survivors by
    1/(1-rate); identity at evaluation time."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return t
    if rng is None:
        raise ValueError("apply_dropout: rng required when training")
    mask = (rng.random(t.shape) >= rate) / (1.0 - rate)
    return mul(t, Tensor(mask))


def l2_penalty(tensors: list, lam: float) -> Tensor:
    """lam/2 times the sum of squared entries, one tape entry for the lot."""
    if lam < 0:
        raise ValueError(f"l2 coefficient must be >= 0, got {lam}")
    if lam == 0.0 or not tensors:
        return Tensor(np.zeros(1))
    total = sum(float(np.sum(t.data * t.data)) for t in tensors)
    out = Tensor(np.array([0.5 * lam * total]),
                 requires_grad=any(t.requires_grad for t in tensors))

    def rule():
        if out.grad is None:
            return
        for t in tensors:
            if t.requires_grad:
                t.accumulate_grad(out.grad[0] * lam * t.data)

    record(out, rule)
    return out


def forward(batch: EncodedBatch, params: ModelParams, config: ModelConfig,
            rng: np.random.Generator | None, training: bool) -> tuple:
    """Run the full pipeline over one batch.

    Returns (loss tensor, B x classes probability array, attention records).
    Records are produced only when the batch kept its token lists; the
    weight lists are empty in pure vectorial mode, which has no per-word
    scalar weights to export.
    """
    n_examples, length = batch.ids.shape
    if n_examples == 0:
        raise ValueError("forward: empty batch")
    if max(config.filter_widths) > length:
        raise ConfigError(
            f"max filter width {max(config.filter_widths)} exceeds "
            f"padded length {length}")
    banks = params.filters_by_width()
    losses = []
    probs_out = np.empty((n_examples, config.classes))
    records = []
    for e in range(n_examples):
        emb = lookup_rows(params.embedding, batch.ids[e])
        emb = apply_dropout(emb, config.dropout_embedding, rng, training)
        H = bilstm_encode(emb, params.encoder)
        cs = build_channels(H, batch.pad_mask[e], params.scalar_attn,
                            params.vectorial_attn, config.mode, rng, training,
                            axis=config.attention_sum_axis)
        dropped = [apply_dropout(c, config.dropout_cnn_input, rng, training)
                   for c in cs.channels]
        pooled = [max_pool_columns(conv_bank(dropped, banks[w]))
                  for w in config.filter_widths]
        features = pooled[0]
        for part in pooled[1:]:
            features = concat(features, part, axis=0)
        features = apply_dropout(features, config.dropout_penultimate, rng, training)
        probs = classify(features, params.head)
        probs_out[e] = probs.data
        label = int(batch.labels[e])
        if not 0 <= label < config.classes:
            raise ValueError(f"label {label} out of range [0, {config.classes})")
        losses.append(cross_entropy(probs, label))
        if batch.tokens is not None:
            weights = [] if config.mode == "vectorial" else [
                w.data.tolist() for w in cs.scalar_weights]
            records.append(AttentionRecord(
                tokens=padded_tokens(batch.tokens[e], length),
                pads=batch.pad_mask[e].tolist(),
                channels=weights,
                predicted=int(np.argmax(probs.data)),
                label=label))
    total = losses[0]
    for term in losses[1:]:
        total = add(total, term)
    loss = add(mul(total, Tensor(np.array([1.0 / n_examples]))),
               l2_penalty(params.l2_tensors(), config.l2_lambda))
    return loss, probs_out, records
