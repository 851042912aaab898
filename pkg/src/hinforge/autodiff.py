"""Small reverse-mode autodiff over 2-D float64 arrays.

Every tensor is a ``(rows, cols)`` matrix; vectors are ``1 x n`` rows. Ops
record onto the innermost active :class:`Tape` when any input requires a
gradient, and :func:`backward` walks that tape in reverse. The tape is meant to
be rebuilt per training step, so it is held per thread.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    EmptyInput,
    NonDeterministicFunction,
    NonFiniteValue,
    NonScalarLoss,
    ShapeMismatch,
)

NORM_EPS = 1e-12


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, _check=True):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeMismatch(f"tensors are 2-D, got ndim={arr.ndim}")
        if _check and not np.all(np.isfinite(arr)):
            raise NonFiniteValue(name or "tensor")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(arr) if requires_grad else None
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise NonScalarLoss(f"shape {self.shape}")
        return float(self.data[0, 0])

    def zero_grad(self):
        if self.requires_grad:
            self.grad[...] = 0.0

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"


@dataclass
class TapeEntry:
    kind: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tape:
    """Append-only op record. Use as a context manager to make it active."""

    def __init__(self):
        self.entries: list[TapeEntry] = []

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        _stack().pop()
        return False

    def __len__(self):
        return len(self.entries)

    def clear(self):
        self.entries.clear()


_local = threading.local()


def _stack() -> list[Tape]:
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


def _record(kind, inputs, out_data, backward_fn) -> Tensor:
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs, name=kind)
    stack = _stack()
    if needs and stack:
        stack[-1].entries.append(TapeEntry(kind, tuple(inputs), out, backward_fn))
    return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# -- ops -----------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    A, B = a.data, b.data
    return _record("matmul", (a, b), A @ B, lambda g: (g @ B.T, A.T @ g))


def matvec(w: Tensor, x: Tensor) -> Tensor:
    """``w @ x`` for a row vector ``x``; returns a row vector."""
    if x.shape[0] != 1 or w.shape[1] != x.shape[1]:
        raise ShapeMismatch(f"matvec {w.shape} @ {x.shape}")
    W, X = w.data, x.data
    return _record("matvec", (w, x), (W @ X[0])[None, :],
                   lambda g: (g.T @ X, g @ W))


def transpose(a: Tensor) -> Tensor:
    return _record("transpose", (a,), a.data.T.copy(), lambda g: (g.T,))


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may also be a ``1 x cols`` row added to every row of ``a``."""
    if a.shape == b.shape:
        return _record("add", (a, b), a.data + b.data, lambda g: (g, g))
    if b.shape == (1, a.shape[1]):
        return _record("add", (a, b), a.data + b.data, lambda g: (g, g.sum(axis=0, keepdims=True)))
    raise ShapeMismatch(f"add {a.shape} + {b.shape}")


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return _record("scale", (a,), a.data * s, lambda g: (g * s,))


def row_scale(a: Tensor, w: Tensor) -> Tensor:
    """Multiply row ``r`` of ``a`` by the scalar ``w[r, 0]``."""
    if w.shape != (a.shape[0], 1):
        raise ShapeMismatch(f"row_scale {a.shape} by {w.shape}")
    A, W = a.data, w.data
    return _record("row_scale", (a, w), A * W,
                   lambda g: (g * W, (g * A).sum(axis=1, keepdims=True)))


def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Splice tensors side by side (``axis=1``) or stacked (``axis=0``)."""
    if not parts:
        raise EmptyInput("concat of nothing")
    other = 1 - axis
    if len({p.shape[other] for p in parts}) != 1:
        raise ShapeMismatch(f"concat shapes {[p.shape for p in parts]}")
    sizes = [p.shape[axis] for p in parts]
    cuts = np.cumsum(sizes)[:-1]
    return _record("concat", tuple(parts), np.concatenate([p.data for p in parts], axis=axis),
                   lambda g: tuple(np.split(g, cuts, axis=axis)))


def gather_rows(a: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    n = a.shape[0]

    def back(g):
        out = np.zeros((n, g.shape[1]))
        np.add.at(out, idx, g)
        return (out,)

    return _record("gather_rows", (a,), a.data[idx], back)


def gather_cols(a: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    m = a.shape[1]

    def back(g):
        out = np.zeros((g.shape[0], m))
        np.add.at(out.T, idx, g.T)
        return (out,)

    return _record("gather_cols", (a,), a.data[:, idx], back)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _record("relu", (a,), np.where(mask, a.data, 0.0), lambda g: (g * mask,))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _record("tanh", (a,), y, lambda g: (g * (1.0 - y * y),))


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise NonFiniteValue("log of non-positive value")
    A = a.data
    return _record("log", (a,), np.log(A), lambda g: (g / A,))


def l2_normalize_rows(a: Tensor) -> Tensor:
    """Rows scaled to unit length; rows with norm below 1e-12 map to zero with zero gradient."""
    A = a.data
    norms = np.sqrt((A * A).sum(axis=1, keepdims=True))
    live = norms >= NORM_EPS
    safe = np.where(live, norms, 1.0)
    Y = np.where(live, A / safe, 0.0)

    def back(g):
        proj = (g * Y).sum(axis=1, keepdims=True)
        return (np.where(live, (g - Y * proj) / safe, 0.0),)

    return _record("l2_normalize_rows", (a,), Y, back)


def row_dot(a: Tensor, b: Tensor) -> Tensor:
    """Per-row inner products, returned as an ``n x 1`` column."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"row_dot {a.shape} . {b.shape}")
    A, B = a.data, b.data
    return _record("row_dot", (a, b), (A * B).sum(axis=1, keepdims=True),
                   lambda g: (g * B, g * A))


def cosine_similarity(a: Tensor, b: Tensor) -> Tensor:
    """Row-paired cosine similarity (``n x 1``); zero when either row is ~0."""
    return row_dot(l2_normalize_rows(a), l2_normalize_rows(b))


def cosine_matrix(a: Tensor, b: Tensor) -> Tensor:
    """All-pairs cosine between rows of ``a`` and rows of ``b``."""
    return matmul(l2_normalize_rows(a), transpose(l2_normalize_rows(b)))


def softmax(a: Tensor, mask=None) -> Tensor:
    """Row-wise softmax with max subtraction.

    With ``mask`` (bool array of the same shape) only unmasked entries take
    part; masked entries and fully masked rows come out as exact zeros.
    """
    A = a.data
    if A.shape[1] == 0:
        raise EmptyInput("softmax over zero columns")
    if mask is None:
        shifted = A - A.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        Y = e / e.sum(axis=1, keepdims=True)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != A.shape:
            raise ShapeMismatch(f"mask {mask.shape} vs {A.shape}")
        any_live = mask.any(axis=1, keepdims=True)
        top = np.where(mask, A, -np.inf).max(axis=1, keepdims=True)
        top = np.where(any_live, top, 0.0)
        e = np.where(mask, np.exp(np.where(mask, A - top, 0.0)), 0.0)
        tot = e.sum(axis=1, keepdims=True)
        Y = np.where(any_live, e / np.where(any_live, tot, 1.0), 0.0)

    def back(g):
        return (Y * (g - (g * Y).sum(axis=1, keepdims=True)),)

    return _record("softmax", (a,), Y, back)


def log_softmax(a: Tensor) -> Tensor:
    A = a.data
    shifted = A - A.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    Y = shifted - lse
    P = np.exp(Y)
    return _record("log_softmax", (a,), Y,
                   lambda g: (g - P * g.sum(axis=1, keepdims=True),))


def nll(logp: Tensor, labels) -> Tensor:
    """``-sum_r logp[r, labels[r]]`` as a 1x1 tensor."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (logp.shape[0],):
        raise ShapeMismatch(f"{labels.shape[0]} labels for {logp.shape[0]} rows")
    rows = np.arange(labels.size)
    L = logp.data

    def back(g):
        out = np.zeros_like(L)
        out[rows, labels] = -g[0, 0]
        return (out,)

    return _record("nll", (logp,), -L[rows, labels].sum(), back)


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return _record("sum", (a,), a.data.sum(), lambda g: (np.full(shape, g[0, 0]),))


# -- backward / checks ---------------------------------------------------------

def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every grad-requiring tensor on the tape."""
    if loss.data.size != 1:
        raise NonScalarLoss(f"loss has shape {loss.shape}")
    pending: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    produced = {id(e.output) for e in tape.entries}
    for entry in reversed(tape.entries):
        g = pending.pop(id(entry.output), None)
        if g is None:
            continue
        entry.output.grad += g
        for inp, gi in zip(entry.inputs, entry.backward(g)):
            if gi is None or not inp.requires_grad:
                continue
            if id(inp) in produced:
                if id(inp) in pending:
                    pending[id(inp)] = pending[id(inp)] + gi
                else:
                    pending[id(inp)] = gi
            else:
                inp.grad += gi
    # loss produced with no recorded ops but itself a leaf
    if id(loss) in pending and loss.requires_grad and id(loss) not in produced:
        loss.grad += pending.pop(id(loss))


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str | None
    worst_index: tuple[int, int] | None
    n_checked: int
    per_param: dict[str, float]
    tol: float | None = None

    def passed(self, tol: float | None = None) -> bool:
        tol = self.tol if tol is None else tol
        if tol is None:
            raise ValueError("no tolerance given to the check or to passed()")
        return self.max_rel_error < tol


def finite_difference_check(f: Callable[[Sequence[Tensor]], Tensor], params: Sequence[Tensor],
                            eps: float = 1e-5, tol: float | None = None) -> GradCheckReport:
    """Compare analytic gradients of ``f(params)`` with central differences.

    ``f`` must build its result from ``params`` using the ops in this module.
    Relative error per entry is ``|a - n| / max(1e-8, |a| + |n|)``.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError(f"eps={eps} outside [1e-7, 1e-3]")
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = f(params)
    backward(tape, loss)
    base = loss.item()
    if _eval(f, params) != base:
        raise NonDeterministicFunction("two evaluations at the same point differ")

    worst, where, count = 0.0, (None, None), 0
    per_param = {}
    for pi, p in enumerate(params):
        pname = p.name or f"param{pi}"
        pworst = 0.0
        analytic = p.grad.copy()
        for idx in np.ndindex(*p.shape):
            orig = p.data[idx]
            p.data[idx] = orig + eps
            up = _eval(f, params)
            p.data[idx] = orig - eps
            down = _eval(f, params)
            p.data[idx] = orig
            num = (up - down) / (2.0 * eps)
            a = analytic[idx]
            rel = abs(a - num) / max(1e-8, abs(a) + abs(num))
            count += 1
            if rel > pworst:
                pworst = rel
            if rel > worst:
                worst, where = rel, (pname, idx)
        per_param[pname] = pworst
    return GradCheckReport(worst, where[0], where[1], count, per_param, tol)


def _eval(f, params) -> float:
    # evaluate without recording: no active tape for this call
    saved = _stack()[:]
    _stack().clear()
    try:
        return f(params).item()
    finally:
        _stack().extend(saved)
