"""A minimal reverse-mode tape over the primitives the model uses.

Only these operations are differentiable: matmul, spmm, tanh, relu, add,
row_scale, grouped_row_softmax, softmax_cross_entropy and dropout. Values
are float64 numpy arrays; there is no broadcasting beyond what each op
documents.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from vnhgcn.errors import ConfigError, ShapeError


class Var:
    __slots__ = ("value", "grad", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var({self.name or ''} shape={self.shape}, requires_grad={self.requires_grad})"


def _accumulate(v: Var, g: np.ndarray):
    if not v.requires_grad:
        return
    v.grad = g if v.grad is None else v.grad + g


class Tape:
    """Records primitive applications; ``backward`` replays them in reverse.

    With ``record=False`` the ops only compute values, which is what inference
    uses.
    """

    def __init__(self, record: bool = True):
        self.record = record
        self._entries: list[tuple[tuple[Var, ...], Callable[[], None]]] = []

    def __len__(self):
        return len(self._entries)

    def leaf(self, value, requires_grad: bool = False, name: str | None = None) -> Var:
        return Var(value, requires_grad=requires_grad and self.record, name=name)

    def _out(self, value, inputs: Sequence[Var]) -> Var:
        return Var(value, requires_grad=self.record and any(v.requires_grad for v in inputs))

    def _push(self, outputs: tuple[Var, ...], backward: Callable[[], None]):
        if self.record and any(o.requires_grad for o in outputs):
            self._entries.append((outputs, backward))

    # primitives

    def matmul(self, a: Var, b: Var) -> Var:
        if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
        out = self._out(a.value @ b.value, (a, b))

        def backward():
            g = out.grad
            if a.requires_grad:
                _accumulate(a, g @ b.value.T)
            if b.requires_grad:
                _accumulate(b, a.value.T @ g)

        self._push((out,), backward)
        return out

    def spmm(self, adj, x: Var) -> Var:
        """Sparse (non-trainable) adjacency times dense ``x``."""
        if x.value.ndim != 2 or adj.shape[1] != x.shape[0]:
            raise ShapeError(f"spmm shape mismatch: adjacency {adj.shape} @ {x.shape}")
        out = self._out(adj.matmul(x.value), (x,))

        def backward():
            _accumulate(x, adj.rmatmul_t(out.grad))

        self._push((out,), backward)
        return out

    def tanh(self, x: Var) -> Var:
        y = np.tanh(x.value)
        out = self._out(y, (x,))

        def backward():
            _accumulate(x, out.grad * (1.0 - y * y))

        self._push((out,), backward)
        return out

    def relu(self, x: Var) -> Var:
        pos = x.value > 0
        out = self._out(np.where(pos, x.value, 0.0), (x,))

        def backward():
            _accumulate(x, np.where(pos, out.grad, 0.0))

        self._push((out,), backward)
        return out

    def add(self, *xs: Var) -> Var:
        if not xs:
            raise ConfigError("add needs at least one operand")
        shape = xs[0].shape
        for x in xs[1:]:
            if x.shape != shape:
                raise ShapeError(f"add shape mismatch: {shape} vs {x.shape}")
        total = xs[0].value.copy()
        for x in xs[1:]:
            total += x.value
        out = self._out(total, xs)

        def backward():
            for x in xs:
                _accumulate(x, out.grad)

        self._push((out,), backward)
        return out

    def row_scale(self, x: Var, s: Var) -> Var:
        """Scale row i of ``x`` by ``s[i, 0]``."""
        if x.value.ndim != 2 or s.shape != (x.shape[0], 1):
            raise ShapeError(f"row_scale needs a ({x.shape[0]}, 1) column, got {s.shape}")
        out = self._out(x.value * s.value, (x, s))

        def backward():
            g = out.grad
            if x.requires_grad:
                _accumulate(x, g * s.value)
            if s.requires_grad:
                _accumulate(s, np.sum(g * x.value, axis=1, keepdims=True))

        self._push((out,), backward)
        return out

    def grouped_row_softmax(self, columns: Sequence[Var]) -> list[Var]:
        """Softmax across a list of ``(n, 1)`` logit columns, independently per row."""
        if not columns:
            raise ConfigError("grouped_row_softmax needs at least one column")
        n = columns[0].shape[0]
        for c in columns:
            if c.shape != (n, 1):
                raise ShapeError(f"softmax columns must all be ({n}, 1), got {c.shape}")
        logits = np.concatenate([c.value for c in columns], axis=1)
        p = softmax_rows(logits)
        outs = [self._out(p[:, k:k + 1], columns) for k in range(len(columns))]

        def backward():
            g = np.concatenate(
                [o.grad if o.grad is not None else np.zeros((n, 1)) for o in outs], axis=1)
            ge = p * (g - np.sum(p * g, axis=1, keepdims=True))
            for k, c in enumerate(columns):
                _accumulate(c, ge[:, k:k + 1])

        self._push(tuple(outs), backward)
        return outs

    def softmax_cross_entropy(self, logits: Var, labels, mask) -> Var:
        """Mean cross-entropy over the rows listed in ``mask``; returns a scalar."""
        mask = np.asarray(mask, dtype=np.int64)
        if mask.size == 0:
            raise ConfigError("softmax_cross_entropy needs a non-empty mask")
        labels = np.asarray(labels, dtype=np.int64)
        z = logits.value[mask]
        y = labels[mask]
        if y.min() < 0 or y.max() >= z.shape[1]:
            raise ConfigError(f"labels must lie in 0..{z.shape[1] - 1} on masked rows")
        logp = log_softmax_rows(z)
        rows = np.arange(mask.size)
        out = self._out(-np.mean(logp[rows, y]), (logits,))

        def backward():
            d = np.exp(logp)
            d[rows, y] -= 1.0
            full = np.zeros_like(logits.value)
            np.add.at(full, mask, d * (out.grad / mask.size))
            _accumulate(logits, full)

        self._push((out,), backward)
        return out

    def dropout(self, x: Var, rate: float, seed, training: bool) -> Var:
        """Inverted dropout. ``seed`` may be an int or a ``numpy.random.Generator``."""
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
        if not training or rate == 0.0:
            return x
        rng = np.random.default_rng(seed)
        scale = (rng.random(x.shape) >= rate) / (1.0 - rate)
        out = self._out(x.value * scale, (x,))

        def backward():
            _accumulate(x, out.grad * scale)

        self._push((out,), backward)
        return out

    def backward(self, loss: Var):
        if loss.value.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.value)
        for outputs, fn in reversed(self._entries):
            if any(o.grad is not None for o in outputs):
                fn()
        self._entries.clear()


def softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - np.max(z, axis=1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=1, keepdims=True)


def log_softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - np.max(z, axis=1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=1, keepdims=True))
