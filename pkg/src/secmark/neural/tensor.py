"""A small reverse-mode autodiff core on numpy arrays (float64).

Only what the sentence models need: elementwise ops with broadcasting,
matmul, row gathers, concatenation, slicing, max over time and a fused
softmax cross-entropy.  ``backward`` walks the graph in reverse topological
order and accumulates into ``.grad``.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericalError, ShapeError
from ..sgns import scatter_add


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        data = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(data)):
            raise NumericalError(f"non-finite value produced{' in ' + name if name else ''}")
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}{', grad' if self.requires_grad else ''})"

    def _accumulate(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without a gradient needs a scalar, got shape {self.data.shape}")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
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
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                grads[id(parent)] = grads[id(parent)] + pg if id(parent) in grads else pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name=None) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64, copy=True), requires_grad=True, name=name)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    return Tensor(a.data + b.data, _parents=(a, b),
                  _backward=lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    return Tensor(a.data - b.data, _parents=(a, b),
                  _backward=lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    return Tensor(a.data * b.data, _parents=(a, b),
                  _backward=lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def matmul(a, b) -> Tensor:
    """``a @ b`` for a of shape (..., n, k) and 2-D b of shape (k, m)."""
    a, b = as_tensor(a), as_tensor(b)
    if b.data.ndim != 2 or a.data.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} vs {b.shape}")

    def back(g):
        ga = g @ b.data.T
        a2 = a.data.reshape(-1, a.shape[-1])
        gb = a2.T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return Tensor(a.data @ b.data, _parents=(a, b), _backward=back)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return Tensor(out, _parents=(x,), _backward=lambda g: (g * out * (1.0 - out),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return Tensor(out, _parents=(x,), _backward=lambda g: (g * (1.0 - out * out),))


def relu(x) -> Tensor:
    x = as_tensor(x)
    pos = x.data > 0
    return Tensor(np.where(pos, x.data, 0.0), _parents=(x,), _backward=lambda g: (g * pos,))


def softmax(x) -> Tensor:
    """Softmax over the last axis."""
    x = as_tensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return Tensor(out, _parents=(x,), _backward=back)


def concat(tensors, axis=-1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of nothing")
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(s != r for i, (s, r) in enumerate(zip(t.shape, ref)) if i != ax):
            raise ShapeError(f"concat: shape mismatch {ref} vs {t.shape}")
    sizes = np.cumsum([t.shape[ax] for t in tensors])[:-1]

    def back(g):
        return tuple(np.split(g, sizes, axis=ax))

    return Tensor(np.concatenate([t.data for t in tensors], axis=ax), _parents=tuple(tensors), _backward=back)


def dropout_mask(x, mask) -> Tensor:
    """Multiply by a fixed (already rescaled) mask; the mask is a constant."""
    x = as_tensor(x)
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != x.shape:
        raise ShapeError(f"dropout_mask: shape mismatch {x.shape} vs {mask.shape}")
    return Tensor(x.data * mask, _parents=(x,), _backward=lambda g: (g * mask,))


def make_dropout_mask(shape, rate, rng) -> np.ndarray:
    if not 0.0 <= rate < 1.0:
        raise ShapeError(f"dropout rate {rate} outside [0, 1)")
    if rate == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def max_over_time(x) -> Tensor:
    """Max over axis -2 (time), e.g. (T, C) -> (C,) or (B, T, C) -> (B, C).

    The gradient goes to the first maximal time step.
    """
    x = as_tensor(x)
    if x.data.ndim < 2:
        raise ShapeError(f"max_over_time needs a time axis, got shape {x.shape}")
    idx = np.argmax(x.data, axis=-2)
    out = np.take_along_axis(x.data, np.expand_dims(idx, -2), axis=-2).squeeze(-2)

    def back(g):
        full = np.zeros_like(x.data)
        np.put_along_axis(full, np.expand_dims(idx, -2), np.expand_dims(g, -2), axis=-2)
        return (full,)

    return Tensor(out, _parents=(x,), _backward=back)


def gather_rows(table, index) -> Tensor:
    """``table[index]`` for an integer index array of any shape (embedding lookup)."""
    table = as_tensor(table)
    index = np.asarray(index, dtype=np.int64)
    if table.data.ndim != 2:
        raise ShapeError(f"gather_rows needs a 2-D table, got shape {table.shape}")
    if index.size and (index.min() < 0 or index.max() >= table.shape[0]):
        raise ShapeError(f"gather_rows: index outside table of shape {table.shape}")

    def back(g):
        full = np.zeros_like(table.data)
        scatter_add(full, index.ravel(), np.ascontiguousarray(g).reshape(-1, table.shape[1]))
        return (full,)

    return Tensor(table.data[index], _parents=(table,), _backward=back)


def getitem(x, key) -> Tensor:
    x = as_tensor(x)

    def back(g):
        full = np.zeros_like(x.data)
        if _fancy(key):
            np.add.at(full, key, g)
        else:
            full[key] = g
        return (full,)

    return Tensor(x.data[key], _parents=(x,), _backward=back)


def _fancy(key):
    keys = key if isinstance(key, tuple) else (key,)
    return any(isinstance(k, (list, np.ndarray)) for k in keys)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {x.shape} as {tuple(shape)}") from None
    return Tensor(out, _parents=(x,), _backward=lambda g: (g.reshape(x.shape),))


def where(cond, a, b) -> Tensor:
    """Elementwise select with a constant boolean condition."""
    a, b = as_tensor(a), as_tensor(b)
    cond = np.asarray(cond, dtype=bool)
    return Tensor(np.where(cond, a.data, b.data), _parents=(a, b),
                  _backward=lambda g: (_unbroadcast(np.where(cond, g, 0.0), a.shape),
                                       _unbroadcast(np.where(cond, 0.0, g), b.shape)))


def sum_all(x) -> Tensor:
    x = as_tensor(x)
    return Tensor(x.data.sum(), _parents=(x,), _backward=lambda g: (np.broadcast_to(g, x.shape).copy(),))


def cross_entropy(logits, targets) -> tuple[Tensor, np.ndarray]:
    """Mean categorical cross-entropy of softmax(logits) against integer targets.

    Returns (scalar loss tensor, probabilities).
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.data.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: shape mismatch {logits.shape} vs {targets.shape}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - log_norm
    probs = np.exp(logp)
    n = targets.size
    loss = -logp[np.arange(n), targets].mean()

    def back(g):
        d = probs.copy()
        d[np.arange(n), targets] -= 1.0
        return (g * d / n,)

    return Tensor(loss, _parents=(logits,), _backward=back), probs
