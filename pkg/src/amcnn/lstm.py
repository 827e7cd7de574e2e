"""LSTM cell and bi-directional encoder.

The cell computes, from the previous hidden state h and input x (z = [h, x]):

    f = sig(W_f z + b_f)        forget gate
    i = sig(W_i z + b_i)        input gate
    o = sig(W_o z + b_o)        output gate
    g = tanh(W_C z + b_C)       candidate cell state
    c = f * c_prev + i * g
    h = o * tanh(c)

The whole cell is one tape operation with a hand-derived backward rule, so
an n-step pass records n entries instead of dozens; finite differences in
the test suite validate the rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .tensor import Tensor, concat, record, sigmoid_raw, stack, take_row


@dataclass
class LstmParams:
    """Gate weights (each hidden x (hidden + input)) and biases for one direction."""

    W_f: Tensor
    W_i: Tensor
    W_o: Tensor
    W_C: Tensor
    b_f: Tensor
    b_i: Tensor
    b_o: Tensor
    b_C: Tensor

    @property
    def hidden_size(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_f.shape[1] - self.W_f.shape[0]

    def validate(self) -> None:
        shape = self.W_f.shape
        for name in ("W_i", "W_o", "W_C"):
            if getattr(self, name).shape != shape:
                raise DimensionError(f"{name} shape {getattr(self, name).shape} != {shape}")
        for name in ("b_f", "b_i", "b_o", "b_C"):
            if getattr(self, name).shape != (shape[0],):
                raise DimensionError(f"{name} shape {getattr(self, name).shape} != ({shape[0]},)")


@dataclass
class BiLstmParams:
    forward: LstmParams
    backward: LstmParams

    def validate(self) -> None:
        self.forward.validate()
        self.backward.validate()
        if self.forward.hidden_size != self.backward.hidden_size:
            raise DimensionError("forward/backward hidden sizes differ")
        if self.forward.input_size != self.backward.input_size:
            raise DimensionError("forward/backward input sizes differ")


def init_lstm_params(hidden_size: int, input_size: int, rng: np.random.Generator,
                     scale: float = 0.08, requires_grad: bool = True) -> LstmParams:
    """Uniform [-scale, scale] weights, zero biases."""

    def weight():
        return Tensor(rng.uniform(-scale, scale, size=(hidden_size, hidden_size + input_size)),
                      requires_grad=requires_grad)

    def bias():
        return Tensor(np.zeros(hidden_size), requires_grad=requires_grad)

    return LstmParams(W_f=weight(), W_i=weight(), W_o=weight(), W_C=weight(),
                      b_f=bias(), b_i=bias(), b_o=bias(), b_C=bias())


def init_bilstm_params(hidden_size: int, input_size: int,
                       rng: np.random.Generator) -> BiLstmParams:
    return BiLstmParams(forward=init_lstm_params(hidden_size, input_size, rng),
                        backward=init_lstm_params(hidden_size, input_size, rng))


def lstm_cell(x_t: Tensor, h_prev: Tensor, c_prev: Tensor, p: LstmParams) -> tuple:
    """One LSTM step; returns (h_t, c_t) as a single fused tape operation."""
    d, k = p.hidden_size, p.input_size
    if x_t.shape != (k,):
        raise DimensionError(f"lstm_cell: input shape {x_t.shape}, expected ({k},)")
    if h_prev.shape != (d,) or c_prev.shape != (d,):
        raise DimensionError(
            f"lstm_cell: state shapes {h_prev.shape}/{c_prev.shape}, expected ({d},)")

    z = np.concatenate([h_prev.data, x_t.data])
    f = sigmoid_raw(p.W_f.data @ z + p.b_f.data)
    i = sigmoid_raw(p.W_i.data @ z + p.b_i.data)
    o = sigmoid_raw(p.W_o.data @ z + p.b_o.data)
    g = np.tanh(p.W_C.data @ z + p.b_C.data)
    c = f * c_prev.data + i * g
    tc = np.tanh(c)
    h = o * tc

    needs = (x_t.requires_grad or h_prev.requires_grad or c_prev.requires_grad
             or any(t.requires_grad for t in (p.W_f, p.W_i, p.W_o, p.W_C,
                                              p.b_f, p.b_i, p.b_o, p.b_C)))
    h_t = Tensor(h, requires_grad=needs)
    c_t = Tensor(c, requires_grad=needs)

    def rule():
        gh = h_t.grad
        gc = c_t.grad
        if gh is None and gc is None:
            return
        gh = gh if gh is not None else np.zeros(d)
        gc = gc if gc is not None else np.zeros(d)
        dc = gc + gh * o * (1.0 - tc * tc)
        d_o = gh * tc
        d_f = dc * c_prev.data
        d_i = dc * g
        d_g = dc * i
        # pre-activation gradients
        a_f = d_f * f * (1.0 - f)
        a_i = d_i * i * (1.0 - i)
        a_o = d_o * o * (1.0 - o)
        a_g = d_g * (1.0 - g * g)
        for W, b, a in ((p.W_f, p.b_f, a_f), (p.W_i, p.b_i, a_i),
                        (p.W_o, p.b_o, a_o), (p.W_C, p.b_C, a_g)):
            if W.requires_grad:
                W.accumulate_grad(np.outer(a, z))
            if b.requires_grad:
                b.accumulate_grad(a)
        if x_t.requires_grad or h_prev.requires_grad:
            dz = (p.W_f.data.T @ a_f + p.W_i.data.T @ a_i
                  + p.W_o.data.T @ a_o + p.W_C.data.T @ a_g)
            if h_prev.requires_grad:
                h_prev.accumulate_grad(dz[:d])
            if x_t.requires_grad:
                x_t.accumulate_grad(dz[d:])
        if c_prev.requires_grad:
            c_prev.accumulate_grad(dc * f)

    record(h_t, rule)
    return h_t, c_t


def bilstm_encode(X: Tensor, p: BiLstmParams) -> Tensor:
    """Encode an n x k sequence into n x 2d hidden states.

    The forward direction reads positions 1..n, the backward direction n..1,
    both from zero initial states; row i is [h_fwd_i, h_bwd_i].  Padded
    positions are processed like real tokens (attention masks them later).
    """
    if X.data.ndim != 2:
        raise DimensionError(f"bilstm_encode: expected n x k input, got {X.shape}")
    n, k = X.shape
    if n < 1:
        raise DimensionError("bilstm_encode: empty sequence")
    if k != p.forward.input_size:
        raise DimensionError(
            f"bilstm_encode: input width {k} != parameter input size {p.forward.input_size}")
    d = p.forward.hidden_size

    xs = [take_row(X, t) for t in range(n)]

    def run(direction: LstmParams, order: range) -> list:
        h = Tensor(np.zeros(d))
        c = Tensor(np.zeros(d))
        states = [None] * n
        for t in order:
            h, c = lstm_cell(xs[t], h, c, direction)
            states[t] = h
        return states

    fwd = run(p.forward, range(n))
    bwd = run(p.backward, range(n - 1, -1, -1))
    return stack([concat(fwd[t], bwd[t], axis=0) for t in range(n)], axis=0)
