"""Adam with bias correction over named parameter tensors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError


@dataclass
class AdamState:
    """First/second moment buffers keyed by parameter name, plus the step
    counter driving bias correction."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def init_adam(named_params: list) -> AdamState:
    state = AdamState()
    for name, p in named_params:
        state.m[name] = np.zeros_like(p.data)
        state.v[name] = np.zeros_like(p.data)
    return state


def adam_step(named_params: list, state: AdamState, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One in-place update; missing gradients count as zero."""
    state.t += 1
    correct1 = 1.0 - beta1 ** state.t
    correct2 = 1.0 - beta2 ** state.t
    for name, p in named_params:
        if name not in state.m:
            raise DimensionError(f"adam_step: no state for parameter {name!r}")
        if state.m[name].shape != p.data.shape:
            raise DimensionError(
                f"adam_step: state shape {state.m[name].shape} != parameter "
                f"shape {p.data.shape} for {name!r}")
        g = p.grad if p.grad is not None else 0.0
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * (g * g)
        m_hat = state.m[name] / correct1
        v_hat = state.v[name] / correct2
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
