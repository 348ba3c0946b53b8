"""Minimal reverse-mode automatic differentiation over numpy arrays.

Only the operations the encoder-decoder needs are provided.  Every op
records a closure that maps the output gradient to parent gradients;
``backward`` walks the tape in reverse topological order.
"""

from __future__ import annotations

import contextlib

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


class Var:
    __slots__ = ("value", "grad", "parents", "backward_fn", "requires_grad", "name")

    def __init__(self, value, requires_grad=False, name=None):
        self.value = np.asarray(value, dtype=np.float64) if not isinstance(value, np.ndarray) else value
        self.grad = None
        self.parents = ()
        self.backward_fn = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape}, name={self.name})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_var(other)))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, idx):
        return getitem(self, idx)


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(np.asarray(x, dtype=np.float64))


def _make(value, parents, backward_fn) -> Var:
    out = Var(value)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = parents
        out.backward_fn = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return _make(a.value + b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def neg(a: Var) -> Var:
    return _make(-a.value, (a,), lambda g: (-g,))


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return _make(a.value * b.value, (a, b),
                 lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)))


def matmul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    av, bv = a.value, b.value

    def back(g):
        if bv.ndim == 1:
            ga = g[..., None] * bv
            gb = np.tensordot(g, av, axes=(tuple(range(g.ndim)), tuple(range(av.ndim - 1))))
            return ga, gb
        ga = g @ np.swapaxes(bv, -1, -2)
        gb = np.swapaxes(av, -1, -2) @ g
        return _unbroadcast(ga, av.shape), _unbroadcast(gb, bv.shape)

    return _make(av @ bv, (a, b), back)


def tanh(a: Var) -> Var:
    y = np.tanh(a.value)
    return _make(y, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a: Var) -> Var:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return _make(y, (a,), lambda g: (g * y * (1.0 - y),))


def concat(xs, axis=-1) -> Var:
    xs = [as_var(x) for x in xs]
    sizes = [x.value.shape[axis] for x in xs]
    bounds = np.cumsum([0] + sizes)

    def back(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis)
                     for i in range(len(xs)))

    return _make(np.concatenate([x.value for x in xs], axis=axis), tuple(xs), back)


def stack(xs, axis=1) -> Var:
    xs = [as_var(x) for x in xs]

    def back(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(xs)))

    return _make(np.stack([x.value for x in xs], axis=axis), tuple(xs), back)


def getitem(a: Var, idx) -> Var:
    def back(g):
        out = np.zeros_like(a.value)
        out[idx] += g
        return (out,)

    return _make(a.value[idx], (a,), back)


def embed(table: Var, ids: np.ndarray) -> Var:
    """Row lookup; ids may have any shape."""
    ids = np.asarray(ids)

    def back(g):
        out = np.zeros_like(table.value)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, table.value.shape[1]))
        return (out,)

    return _make(table.value[ids], (table,), back)


def reshape(a: Var, shape) -> Var:
    return _make(a.value.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def softmax(a: Var, axis=-1) -> Var:
    z = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _make(y, (a,), back)


def log_softmax_np(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits: Var, targets: np.ndarray, weights: np.ndarray) -> Var:
    """Sum over rows of weights * -log softmax(logits)[target]."""
    logp = log_softmax_np(logits.value)
    rows = np.arange(len(targets))
    loss = -(weights * logp[rows, targets]).sum()

    def back(g):
        p = np.exp(logp)
        p[rows, targets] -= 1.0
        return (g * p * weights[:, None],)

    return _make(np.asarray(loss), (logits,), back)


def sum_all(a: Var) -> Var:
    return _make(np.asarray(a.value.sum()), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def backward(root: Var) -> None:
    order: list[Var] = []
    seen = set()
    stack_ = [(root, False)]
    while stack_:
        node, done = stack_.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node.backward_fn is None or node.grad is None:
            continue
        for parent, g in zip(node.parents, node.backward_fn(node.grad)):
            if not parent.requires_grad:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g
        if node.parents:
            node.grad = None
