"""Minimal reverse-mode automatic differentiation over numpy arrays.

Every operation returns a :class:`Tensor` that remembers its parents and a
closure pushing the output gradient back to them. ``backward`` walks the
recorded graph once in reverse topological order.
"""
from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "parents", "_backward", "name")

    def __init__(self, value, parents: Sequence["Tensor"] = (), backward: Optional[Callable] = None, name=None):
        self.value = np.asarray(value, dtype=float)
        self.grad: Optional[np.ndarray] = None
        self.parents = tuple(parents)
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=float, copy=True)
        else:
            self.grad += g

    def backward(self, seed=None) -> None:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.value) if seed is None else np.asarray(seed, dtype=float)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __getitem__(self, key):
        return getitem(self, key)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, name={self.name})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value + b.value, (a, b))

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    out._backward = backward
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.value, (a,))
    out._backward = lambda g: a._accumulate(-g)
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value * b.value, (a, b))

    def backward(g):
        a._accumulate(_unbroadcast(g * b.value, a.shape))
        b._accumulate(_unbroadcast(g * a.value, b.shape))

    out._backward = backward
    return out


def linear(x: Tensor, W: Tensor) -> Tensor:
    """``x @ W.T`` for x of shape (..., n) and W of shape (m, n)."""
    out = Tensor(x.value @ W.value.T, (x, W))

    def backward(g):
        x._accumulate(g @ W.value)
        W._accumulate(g.reshape(-1, g.shape[-1]).T @ x.value.reshape(-1, x.shape[-1]))

    out._backward = backward
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.value)
    out = Tensor(y, (a,))
    out._backward = lambda g: a._accumulate(g * (1.0 - y * y))
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    out = Tensor(y, (a,))
    out._backward = lambda g: a._accumulate(g * y * (1.0 - y))
    return out


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    z = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y, (a,))

    def backward(g):
        a._accumulate(y * (g - (g * y).sum(axis=axis, keepdims=True)))

    out._backward = backward
    return out


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    z = a.value - a.value.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    y = z - lse
    p = np.exp(y)
    out = Tensor(y, (a,))

    def backward(g):
        a._accumulate(g - p * g.sum(axis=axis, keepdims=True))

    out._backward = backward
    return out


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = Tensor(np.concatenate([p.value for p in parts], axis=axis), parts)
    sizes = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g):
        for p, gp in zip(parts, np.split(g, sizes, axis=axis)):
            p._accumulate(gp)

    out._backward = backward
    return out


def stack(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = Tensor(np.stack([p.value for p in parts], axis=axis), parts)

    def backward(g):
        for k, p in enumerate(parts):
            p._accumulate(np.take(g, k, axis=axis))

    out._backward = backward
    return out


def getitem(a: Tensor, key) -> Tensor:
    out = Tensor(a.value[key], (a,))

    parts = key if isinstance(key, tuple) else (key,)
    basic = all(isinstance(k, (int, slice)) or k is Ellipsis for k in parts)

    def backward(g):
        full = np.zeros_like(a.value)
        if basic:
            full[key] = g
        else:
            np.add.at(full, key, g)
        a._accumulate(full)

    out._backward = backward
    return out


def expand_dims(a: Tensor, axis: int) -> Tensor:
    out = Tensor(np.expand_dims(a.value, axis), (a,))
    out._backward = lambda g: a._accumulate(np.squeeze(g, axis=axis))
    return out


def reduce_sum(a: Tensor, axis=None) -> Tensor:
    out = Tensor(a.value.sum(axis=axis), (a,))

    def backward(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.shape))
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.shape))

    out._backward = backward
    return out


def pick(a: Tensor, labels) -> Tensor:
    """``a[b, labels[b]]`` for a 2-D tensor."""
    labels = np.asarray(labels, dtype=int)
    rows = np.arange(len(labels))
    out = Tensor(a.value[rows, labels], (a,))

    def backward(g):
        full = np.zeros_like(a.value)
        full[rows, labels] = g
        a._accumulate(full)

    out._backward = backward
    return out


def mean(a: Tensor) -> Tensor:
    n = a.value.size
    out = Tensor(a.value.mean(), (a,))
    out._backward = lambda g: a._accumulate(np.full(a.shape, g / n))
    return out
