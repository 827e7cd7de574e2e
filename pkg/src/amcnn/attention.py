"""Multichannel attention over Bi-LSTM hidden states.

Two mechanisms, usable separately or combined per channel:

* scalar: a word-word association matrix (bilinear + tanh), randomly masked
  during training, is column-summed into one importance score per word and
  softmax-normalized.  Padding positions get a -99999 additive sentinel so
  their weight underflows to zero.
* vectorial: a one-hidden-layer scorer assigns each word a score per hidden
  dimension; softmax runs independently per dimension across positions.

Channels keep the n x 2d row order of the input so downstream convolution
sees word order, not a pooled summary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .tensor import (Tensor, add, add_rowvec, matmul, mul, scale_rows,
                     sigmoid, softmax_columns, softmax_stable, sum_axis,
                     tanh, transpose)

PAD_SENTINEL = -99999.0

MODES = ("scalar", "vectorial", "combined")


@dataclass
class ScalarAttnParams:
    """One channel's word-association parameters.

    bilinear: 2d x 2d matrix scoring hidden-state pairs
    bias: scalar added to every association score
    keep_prob: Bernoulli keep-probability of the channel's random mask
    """

    bilinear: Tensor
    bias: Tensor
    keep_prob: float = 0.8

    def __post_init__(self):
        if not 0.0 < self.keep_prob <= 1.0:
            raise ValueError(f"keep_prob must be in (0, 1], got {self.keep_prob}")


@dataclass
class VectorialAttnParams:
    """One channel's per-dimension scorer: score_i = proj_out^T sig(proj_in h_i + bias).

    proj_in: hidden x 2d input projection
    proj_out: hidden x 2d map from the projection to one score per dimension
    bias: vector of length hidden
    """

    proj_in: Tensor
    proj_out: Tensor
    bias: Tensor

    @property
    def hidden(self) -> int:
        return self.proj_in.shape[0]


@dataclass
class ChannelSet:
    """L attention channels (each n x 2d) plus the per-channel scalar weights
    kept for export; weight entries are None in pure vectorial mode."""

    channels: list
    scalar_weights: list

    def __len__(self) -> int:
        return len(self.channels)


def init_scalar_attn(width: int, keep_prob: float,
                     rng: np.random.Generator) -> ScalarAttnParams:
    scale = np.sqrt(3.0 / width)
    return ScalarAttnParams(
        bilinear=Tensor(rng.uniform(-scale, scale, size=(width, width)), requires_grad=True),
        bias=Tensor(np.zeros(1), requires_grad=True),
        keep_prob=keep_prob)


def init_vectorial_attn(width: int, hidden: int,
                        rng: np.random.Generator) -> VectorialAttnParams:
    scale = np.sqrt(6.0 / (hidden + width))
    return VectorialAttnParams(
        proj_in=Tensor(rng.uniform(-scale, scale, size=(hidden, width)), requires_grad=True),
        proj_out=Tensor(rng.uniform(-scale, scale, size=(hidden, width)), requires_grad=True),
        bias=Tensor(np.zeros(hidden), requires_grad=True))


def association_matrix(H: Tensor, bilinear: Tensor, bias: Tensor) -> Tensor:
    """n x n matrix of pairwise word-association strengths in (-1, 1):
    entry (i, j) = tanh(h_i . (bilinear h_j) + bias)."""
    if H.data.ndim != 2:
        raise DimensionError(f"association_matrix: expected n x 2d hidden states, got {H.shape}")
    width = H.shape[1]
    if bilinear.shape != (width, width):
        raise DimensionError(
            f"association_matrix: bilinear shape {bilinear.shape} incompatible with width {width}")
    return tanh(add(matmul(matmul(H, bilinear), transpose(H)), bias))


def sample_channel_mask(n: int, keep_prob: float, rng: np.random.Generator | None,
                        training: bool) -> np.ndarray:
    """n x n multiplicative mask: Bernoulli(keep_prob) draws during training,
    the constant expectation keep_prob at evaluation time."""
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError(f"keep_prob must be in (0, 1], got {keep_prob}")
    if not training:
        return np.full((n, n), keep_prob)
    if rng is None:
        raise ValueError("sample_channel_mask: rng required when training")
    return (rng.random((n, n)) < keep_prob).astype(np.float64)


def scalar_attention(M: Tensor, mask: np.ndarray, pad_mask: np.ndarray,
                     axis: int = 0) -> Tensor:
    """Per-word importance weights: mask the association matrix, sum each
    column (axis=0; axis=1 sums rows instead), push pad scores to the
    sentinel, normalize with a stable softmax.  Always sums to 1."""
    n = M.shape[0]
    if M.shape != (n, n) or M.data.ndim != 2:
        raise DimensionError(f"scalar_attention: association matrix {M.shape} is not square")
    if mask.shape != (n, n):
        raise DimensionError(f"scalar_attention: mask shape {mask.shape} != {(n, n)}")
    if pad_mask.shape != (n,):
        raise DimensionError(f"scalar_attention: pad mask shape {pad_mask.shape} != ({n},)")
    if axis not in (0, 1):
        raise ValueError(f"scalar_attention: axis must be 0 or 1, got {axis}")
    scores = sum_axis(mul(M, Tensor(mask)), axis=axis)
    sentinel = np.where(pad_mask, PAD_SENTINEL, 0.0)
    return softmax_stable(add(scores, Tensor(sentinel)))


def vectorial_attention(H: Tensor, params: VectorialAttnParams) -> Tensor:
    """n x 2d weights, each hidden dimension softmax-normalized across
    positions, so every column sums to 1."""
    if H.data.ndim != 2:
        raise DimensionError(f"vectorial_attention: expected n x 2d input, got {H.shape}")
    width = H.shape[1]
    if params.proj_in.shape[1] != width or params.proj_out.shape[1] != width:
        raise DimensionError(
            f"vectorial_attention: projections {params.proj_in.shape}/{params.proj_out.shape} "
            f"incompatible with width {width}")
    hidden = sigmoid(add_rowvec(matmul(H, transpose(params.proj_in)), params.bias))
    scores = matmul(hidden, params.proj_out)
    return softmax_columns(scores)


def build_channel(H: Tensor, scalar_weights: Tensor | None,
                  vec_weights: Tensor | None, mode: str) -> Tensor:
    """Weight the hidden rows into one channel matrix, preserving row order."""
    if mode not in MODES:
        raise ValueError(f"unknown channel mode {mode!r}")
    if mode in ("scalar", "combined") and scalar_weights is None:
        raise ValueError(f"mode={mode} requires scalar weights")
    if mode in ("vectorial", "combined") and vec_weights is None:
        raise ValueError(f"mode={mode} requires vectorial weights")
    if mode == "scalar":
        return scale_rows(H, scalar_weights)
    if mode == "vectorial":
        return mul(vec_weights, H)
    return scale_rows(mul(vec_weights, H), scalar_weights)


def build_channels(H: Tensor, pad_mask: np.ndarray, scalar_params: list,
                   vectorial_params: list, mode: str, rng: np.random.Generator | None,
                   training: bool, axis: int = 0) -> ChannelSet:
    """Build all L channels.  Each channel samples its mask from its own rng
    substream so channel order (or parallel evaluation) cannot change the
    draws."""
    if mode not in MODES:
        raise ValueError(f"unknown channel mode {mode!r}")
    n_channels = len(scalar_params) if mode != "vectorial" else len(vectorial_params)
    if n_channels < 1:
        raise ValueError("build_channels: need at least one channel")
    n = H.shape[0]

    streams = [None] * n_channels
    if training and mode != "vectorial":
        if rng is None:
            raise ValueError("build_channels: rng required when training")
        streams = rng.spawn(n_channels)

    channels, weights = [], []
    for l in range(n_channels):
        a_l = None
        if mode != "vectorial":
            p = scalar_params[l]
            M = association_matrix(H, p.bilinear, p.bias)
            V = sample_channel_mask(n, p.keep_prob, streams[l], training)
            a_l = scalar_attention(M, V, pad_mask, axis=axis)
        vec = vectorial_attention(H, vectorial_params[l]) if mode != "scalar" else None
        channels.append(build_channel(H, a_l, vec, mode))
        weights.append(a_l)
    return ChannelSet(channels=channels, scalar_weights=weights)
