"""Dense float64 tensors with reverse-mode differentiation on an explicit tape.

Every operation here computes its result eagerly with numpy and, when a tape
is active and the result participates in the gradient, records a backward
rule on that tape.  Calling :func:`backward` on a scalar loss replays the
recorded rules in reverse registration order, accumulating gradients into the
``grad`` buffer of every tensor with ``requires_grad`` set.

Storage is row-major float64 throughout; there are no views or strides, and
elementwise broadcasting is limited to scalar-vs-tensor.
"""

from __future__ import annotations

import threading

import numpy as np

from .errors import DimensionError

_LOCAL = threading.local()


def _tape_stack() -> list:
    stack = getattr(_LOCAL, "tapes", None)
    if stack is None:
        stack = _LOCAL.tapes = []
    return stack


def active_tape() -> "Tape | None":
    """The innermost tape currently recording on this thread, if any."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """A dense float64 array, optionally tracked for gradient accumulation.

    ``grad`` is allocated lazily during backward and always mirrors the shape
    of ``data``.  Tensors that never require gradients are treated as
    immutable constants and are safe to share across threads.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if arr.ndim > 3:
            raise DimensionError(f"tensors support at most 3 axes, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


class Tape:
    """Ordered record of executed operations with their backward rules.

    Used as a context manager around a forward pass; :func:`backward` replays
    the rules in reverse.  A tape and the tensors built on it belong to one
    thread for the duration of the pass.
    """

    def __init__(self):
        self._rules: list = []

    def record(self, rule) -> None:
        self._rules.append(rule)

    def __len__(self) -> int:
        return len(self._rules)

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _tape_stack().pop()
        assert popped is self, "tapes must be exited in LIFO order"


def record(out: Tensor, rule) -> Tensor:
    """Attach ``rule`` to the active tape if ``out`` participates in gradients.

    ``rule`` is a zero-argument callable that reads ``out.grad`` (and any
    captured caches) and accumulates into the inputs' grads.  Domain modules
    use this hook to register fused operations with hand-derived backward
    rules; finite differences validate every one of them.
    """
    tape = active_tape()
    if tape is not None and out.requires_grad:
        tape.record(rule)
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate ``grad`` on every reachable requires_grad tensor with d loss/d tensor."""
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    loss.accumulate_grad(np.ones_like(loss.data))
    for rule in reversed(tape._rules):
        rule()


# ---------------------------------------------------------------------------
# elementwise operations
# ---------------------------------------------------------------------------

def _is_scalar(t: Tensor) -> bool:
    return t.data.size == 1


def _check_ewise(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape and not (_is_scalar(a) or _is_scalar(b)):
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not match and neither is scalar")


def _reduce_to(g: np.ndarray, shape: tuple) -> np.ndarray:
    # undo scalar broadcasting: collapse the gradient back to the scalar's shape
    if g.shape == shape:
        return g
    return np.sum(g).reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_ewise(a, b, "add")
    out = Tensor(a.data + b.data, a.requires_grad or b.requires_grad)

    def rule():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            a.accumulate_grad(_reduce_to(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_reduce_to(g, b.data.shape))

    return record(out, rule)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_ewise(a, b, "mul")
    out = Tensor(a.data * b.data, a.requires_grad or b.requires_grad)

    def rule():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            a.accumulate_grad(_reduce_to(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_reduce_to(g * a.data, b.data.shape))

    return record(out, rule)


def sigmoid_raw(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic sigmoid on a raw array."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh(x: Tensor) -> Tensor:
    out = Tensor(np.tanh(x.data), x.requires_grad)

    def rule():
        g = out.grad
        if g is None or not x.requires_grad:
            return
        x.accumulate_grad(g * (1.0 - out.data * out.data))

    return record(out, rule)


def sigmoid(x: Tensor) -> Tensor:
    out = Tensor(sigmoid_raw(x.data), x.requires_grad)

    def rule():
        g = out.grad
        if g is None or not x.requires_grad:
            return
        x.accumulate_grad(g * out.data * (1.0 - out.data))

    return record(out, rule)


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0), x.requires_grad)

    def rule():
        g = out.grad
        if g is None or not x.requires_grad:
            return
        # subgradient 0 at exactly 0
        x.accumulate_grad(g * (x.data > 0.0))

    return record(out, rule)


_EWISE = {"tanh": tanh, "sigmoid": sigmoid, "relu": relu, "mul": mul, "add": add}


def ewise(op: str, *args: Tensor) -> Tensor:
    """Dispatch an elementwise op by name: tanh | sigmoid | relu | mul | add."""
    try:
        fn = _EWISE[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    return fn(*args)


# ---------------------------------------------------------------------------
# linear algebra and shape operations
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(a.data @ b.data, a.requires_grad or b.requires_grad)

    def rule():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            a.accumulate_grad(g @ b.data.T)
        if b.requires_grad:
            b.accumulate_grad(a.data.T @ g)

    return record(out, rule)


def matvec(a: Tensor, v: Tensor) -> Tensor:
    if a.data.ndim != 2 or v.data.ndim != 1 or a.shape[1] != v.shape[0]:
        raise DimensionError(f"matvec: incompatible shapes {a.shape} and {v.shape}")
    out = Tensor(a.data @ v.data, a.requires_grad or v.requires_grad)

    def rule():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            a.accumulate_grad(np.outer(g, v.data))
        if v.requires_grad:
            v.accumulate_grad(a.data.T @ g)

    return record(out, rule)


def transpose(t: Tensor) -> Tensor:
    if t.data.ndim != 2:
        raise DimensionError(f"transpose: expected a matrix, got shape {t.shape}")
    out = Tensor(t.data.T, t.requires_grad)

    def rule():
        g = out.grad
        if g is None or not t.requires_grad:
            return
        t.accumulate_grad(g.T)

    return record(out, rule)


def concat(a: Tensor, b: Tensor, axis: int = 0) -> Tensor:
    if a.data.ndim != b.data.ndim:
        raise DimensionError(f"concat: rank mismatch {a.shape} vs {b.shape}")
    if axis >= a.data.ndim:
        raise DimensionError(f"concat: axis {axis} out of range for shape {a.shape}")
    for ax in range(a.data.ndim):
        if ax != axis and a.shape[ax] != b.shape[ax]:
            raise DimensionError(f"concat: shapes {a.shape} and {b.shape} differ on axis {ax}")
    out = Tensor(np.concatenate([a.data, b.data], axis=axis), a.requires_grad or b.requires_grad)
    split = a.shape[axis]

    def rule():
        g = out.grad
        if g is None:
            return
        sl_a = [slice(None)] * g.ndim
        sl_a[axis] = slice(0, split)
        sl_b = [slice(None)] * g.ndim
        sl_b[axis] = slice(split, None)
        if a.requires_grad:
            a.accumulate_grad(g[tuple(sl_a)])
        if b.requires_grad:
            b.accumulate_grad(g[tuple(sl_b)])

    return record(out, rule)


def stack(tensors: list, axis: int = 0) -> Tensor:
    if not tensors:
        raise ValueError("stack: need at least one tensor")
    shape = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != shape:
            raise DimensionError(f"stack: shapes {shape} and {t.shape} differ")
    out = Tensor(np.stack([t.data for t in tensors], axis=axis),
                 any(t.requires_grad for t in tensors))

    def rule():
        g = out.grad
        if g is None:
            return
        parts = np.moveaxis(g, axis, 0)
        for t, part in zip(tensors, parts):
            if t.requires_grad:
                t.accumulate_grad(part)

    return record(out, rule)


def reshape(t: Tensor, shape: tuple) -> Tensor:
    out = Tensor(t.data.reshape(shape), t.requires_grad)

    def rule():
        g = out.grad
        if g is None or not t.requires_grad:
            return
        t.accumulate_grad(g.reshape(t.data.shape))

    return record(out, rule)


def take_row(t: Tensor, i: int) -> Tensor:
    if t.data.ndim != 2:
        raise DimensionError(f"take_row: expected a matrix, got shape {t.shape}")
    out = Tensor(t.data[i], t.requires_grad)

    def rule():
        g = out.grad
        if g is None or not t.requires_grad:
            return
        buf = np.zeros_like(t.data)
        buf[i] = g
        t.accumulate_grad(buf)

    return record(out, rule)


def lookup_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows ``table[ids]``; backward scatter-adds into the table."""
    if table.data.ndim != 2:
        raise DimensionError(f"lookup_rows: expected a matrix, got shape {table.shape}")
    ids = np.asarray(ids, dtype=np.int64)
    out = Tensor(table.data[ids], table.requires_grad)

    def rule():
        g = out.grad
        if g is None or not table.requires_grad:
            return
        buf = np.zeros_like(table.data)
        np.add.at(buf, ids, g)
        table.accumulate_grad(buf)

    return record(out, rule)


def sum_axis(t: Tensor, axis: int | None = None) -> Tensor:
    """Sum over one axis (or all elements when axis is None)."""
    out = Tensor(np.sum(t.data, axis=axis), t.requires_grad)

    def rule():
        g = out.grad
        if g is None or not t.requires_grad:
            return
        if axis is None:
            t.accumulate_grad(np.broadcast_to(g, t.data.shape).copy())
        else:
            t.accumulate_grad(np.broadcast_to(np.expand_dims(g, axis), t.data.shape).copy())

    return record(out, rule)


def scale_rows(m: Tensor, s: Tensor) -> Tensor:
    """Scale row i of ``m`` by ``s[i]``."""
    if m.data.ndim != 2 or s.data.ndim != 1 or m.shape[0] != s.shape[0]:
        raise DimensionError(f"scale_rows: incompatible shapes {m.shape} and {s.shape}")
    out = Tensor(m.data * s.data[:, None], m.requires_grad or s.requires_grad)

    def rule():
        g = out.grad
        if g is None:
            return
        if m.requires_grad:
            m.accumulate_grad(g * s.data[:, None])
        if s.requires_grad:
            s.accumulate_grad(np.sum(g * m.data, axis=1))

    return record(out, rule)


def add_rowvec(m: Tensor, v: Tensor) -> Tensor:
    """Add vector ``v`` to every row of ``m``."""
    if m.data.ndim != 2 or v.data.ndim != 1 or m.shape[1] != v.shape[0]:
        raise DimensionError(f"add_rowvec: incompatible shapes {m.shape} and {v.shape}")
    out = Tensor(m.data + v.data[None, :], m.requires_grad or v.requires_grad)

    def rule():
        g = out.grad
        if g is None:
            return
        if m.requires_grad:
            m.accumulate_grad(g)
        if v.requires_grad:
            v.accumulate_grad(np.sum(g, axis=0))

    return record(out, rule)


# ---------------------------------------------------------------------------
# softmax
# ---------------------------------------------------------------------------

def softmax_raw(scores: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax of a vector; tolerates the -99999 pad sentinel."""
    shifted = scores - np.max(scores)
    e = np.exp(shifted)
    return e / np.sum(e)


def softmax_stable(scores: Tensor) -> Tensor:
    if scores.data.ndim != 1:
        raise DimensionError(f"softmax_stable: expected a vector, got shape {scores.shape}")
    if scores.data.size == 0:
        raise ValueError("softmax_stable: empty input")
    out = Tensor(softmax_raw(scores.data), scores.requires_grad)

    def rule():
        g = out.grad
        if g is None or not scores.requires_grad:
            return
        a = out.data
        scores.accumulate_grad(a * (g - np.dot(g, a)))

    return record(out, rule)


def softmax_columns(t: Tensor) -> Tensor:
    """Independent max-subtracted softmax down each column of a matrix."""
    if t.data.ndim != 2:
        raise DimensionError(f"softmax_columns: expected a matrix, got shape {t.shape}")
    shifted = t.data - np.max(t.data, axis=0, keepdims=True)
    e = np.exp(shifted)
    out = Tensor(e / np.sum(e, axis=0, keepdims=True), t.requires_grad)

    def rule():
        g = out.grad
        if g is None or not t.requires_grad:
            return
        a = out.data
        t.accumulate_grad(a * (g - np.sum(g * a, axis=0, keepdims=True)))

    return record(out, rule)


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

def max_pool(x: Tensor) -> Tensor:
    """Maximum of a vector; gradient routes to the first argmax position."""
    if x.data.ndim != 1:
        raise DimensionError(f"max_pool: expected a vector, got shape {x.shape}")
    if x.data.size == 0:
        raise ValueError("max_pool: empty input")
    idx = int(np.argmax(x.data))
    out = Tensor(x.data[idx], x.requires_grad)

    def rule():
        g = out.grad
        if g is None or not x.requires_grad:
            return
        buf = np.zeros_like(x.data)
        buf[idx] = g[0]
        x.accumulate_grad(buf)

    return record(out, rule)


def max_pool_columns(t: Tensor) -> Tensor:
    """Column-wise maximum of a matrix, first argmax per column on ties."""
    if t.data.ndim != 2:
        raise DimensionError(f"max_pool_columns: expected a matrix, got shape {t.shape}")
    if t.data.shape[0] == 0:
        raise ValueError("max_pool_columns: empty input")
    idx = np.argmax(t.data, axis=0)
    cols = np.arange(t.data.shape[1])
    out = Tensor(t.data[idx, cols], t.requires_grad)

    def rule():
        g = out.grad
        if g is None or not t.requires_grad:
            return
        buf = np.zeros_like(t.data)
        buf[idx, cols] = g
        t.accumulate_grad(buf)

    return record(out, rule)
