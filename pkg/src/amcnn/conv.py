"""Multichannel convolution, max-over-time pooling, and the softmax head.

Filters slide over window positions only (valid convolution, output length
n - l + 1) and sum over hidden dimensions and all channels inside the
window.  All filters sharing one width are evaluated as a single bank: the
windows are gathered once (im2col) and hit with one matmul, recorded as one
tape entry with a hand-derived backward rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import Tensor, add, matvec, record, reshape, softmax_stable

PROB_FLOOR = 1e-12


@dataclass
class ConvFilter:
    """width: window length; weights: width x k x L (k = channel row width,
    L = channel count); bias: scalar."""

    width: int
    weights: Tensor
    bias: Tensor

    def __post_init__(self):
        if self.width < 1:
            raise ConfigError(f"filter width must be >= 1, got {self.width}")
        if self.weights.data.ndim != 3 or self.weights.shape[0] != self.width:
            raise DimensionError(
                f"filter weights {self.weights.shape} inconsistent with width {self.width}")


@dataclass
class ClassifierHead:
    weights: Tensor
    bias: Tensor

    @property
    def classes(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_count(self) -> int:
        return self.weights.shape[1]


def init_conv_filter(width: int, row_width: int, n_channels: int,
                     rng: np.random.Generator) -> ConvFilter:
    # fan-scaled uniform: attention rescales hidden rows by roughly 1/n,
    # so flat small inits leave the head starved of signal
    fan_in = width * row_width * n_channels
    scale = np.sqrt(6.0 / (fan_in + 1))
    return ConvFilter(
        width=width,
        weights=Tensor(rng.uniform(-scale, scale, size=(width, row_width, n_channels)),
                       requires_grad=True),
        bias=Tensor(np.zeros(1), requires_grad=True))


def init_classifier(classes: int, feature_count: int,
                    rng: np.random.Generator) -> ClassifierHead:
    scale = np.sqrt(6.0 / (feature_count + classes))
    return ClassifierHead(
        weights=Tensor(rng.uniform(-scale, scale, size=(classes, feature_count)),
                       requires_grad=True),
        bias=Tensor(np.zeros(classes), requires_grad=True))


def conv_bank(channels: list, filters: list, activation: str = "relu") -> Tensor:
    """Feature maps for all same-width filters at once: (n - l + 1) x F."""
    if activation not in ("relu", "identity"):
        raise ValueError(f"unsupported activation {activation!r}")
    if not filters:
        raise ValueError("conv_bank: no filters")
    width = filters[0].width
    if any(f.width != width for f in filters):
        raise DimensionError("conv_bank: filters must share one width")
    n, k = channels[0].shape
    L = len(channels)
    for c in channels:
        if c.shape != (n, k):
            raise DimensionError(f"conv_bank: channel shape {c.shape} != {(n, k)}")
    for f in filters:
        if f.weights.shape != (width, k, L):
            raise DimensionError(
                f"conv_bank: filter weights {f.weights.shape} != {(width, k, L)}")
    if n < width:
        raise ConfigError(f"sequence length {n} shorter than filter width {width}")

    stacked = np.stack([c.data for c in channels], axis=2)  # n x k x L
    n_out = n - width + 1
    flat = width * k * L
    windows = np.empty((n_out, flat))
    for i in range(n_out):
        windows[i] = stacked[i:i + width].reshape(flat)
    W = np.stack([f.weights.data.reshape(flat) for f in filters])  # F x flat
    b = np.array([f.bias.data[0] for f in filters])
    pre = windows @ W.T + b
    out_data = np.maximum(pre, 0.0) if activation == "relu" else pre

    needs = any(c.requires_grad for c in channels) or any(
        f.weights.requires_grad or f.bias.requires_grad for f in filters)
    out = Tensor(out_data, requires_grad=needs)

    def rule():
        if out.grad is None:
            return
        g = out.grad * (pre > 0.0) if activation == "relu" else out.grad
        for fi, f in enumerate(filters):
            if f.weights.requires_grad:
                f.weights.accumulate_grad((g[:, fi] @ windows).reshape(width, k, L))
            if f.bias.requires_grad:
                f.bias.accumulate_grad(np.array([g[:, fi].sum()]))
        if any(c.requires_grad for c in channels):
            dwin = (g @ W).reshape(n_out, width, k, L)
            dstack = np.zeros_like(stacked)
            for j in range(width):
                dstack[j:j + n_out] += dwin[:, j]
            for li, c in enumerate(channels):
                if c.requires_grad:
                    c.accumulate_grad(dstack[:, :, li])

    record(out, rule)
    return out


def conv_forward(channels: list, filt: ConvFilter, activation: str = "relu") -> Tensor:
    """One filter's feature map as a vector of length n - l + 1."""
    bank = conv_bank(channels, [filt], activation=activation)
    return reshape(bank, (bank.shape[0],))


def classify(features: Tensor, head: ClassifierHead) -> Tensor:
    """Probability vector over classes from the pooled feature vector."""
    if features.shape != (head.feature_count,):
        raise DimensionError(
            f"classify: feature vector {features.shape}, head expects "
            f"({head.feature_count},)")
    return softmax_stable(add(matvec(head.weights, features), head.bias))


def cross_entropy(probs: Tensor, label: int) -> Tensor:
    """Negative log-likelihood of the true class, floored at 1e-12."""
    c = probs.shape[0]
    if not 0 <= label < c:
        raise ValueError(f"label {label} out of range [0, {c})")
    p = max(float(probs.data[label]), PROB_FLOOR)
    out = Tensor(np.array([-np.log(p)]), requires_grad=probs.requires_grad)

    def rule():
        if out.grad is None or not probs.requires_grad:
            return
        if probs.data[label] > PROB_FLOOR:
            buf = np.zeros(c)
            buf[label] = -out.grad[0] / probs.data[label]
            probs.accumulate_grad(buf)

    record(out, rule)
    return out
