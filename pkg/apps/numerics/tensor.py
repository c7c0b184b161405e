"""
Reverse-mode tensor engine.

A closed set of differentiable primitives over float64 numpy arrays. Every
primitive treats the last two axes as (rows, features) and broadcasts over
any leading batch axes, so one graph can carry a whole batch of episodes.

Each op records its parents and a closure mapping the output gradient to
parent gradients. `Tensor.backward()` walks the graph in reverse topological
order and accumulates into `Param.grad`.

Usage:
    from apps.numerics.tensor import Param, matmul, row_softmax

    w = Param(np.eye(3), name='w')
    loss = mean(row_softmax(matmul(x, w)))
    loss.backward()
    w.grad  # d loss / d w
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from apps.core.exceptions import ShapeError

LAYER_NORM_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)

GradFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tensor:
    """An immutable float64 array that remembers how it was computed."""

    __slots__ = ('data', 'grad', 'requires_grad', '_parents', '_backward', 'name')

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple['Tensor', ...] = (),
        backward: GradFn | None = None,
        name: str = '',
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        """Return a read-only view of the values."""
        view = self.data.view()
        view.flags.writeable = False
        return view

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        label = f' {self.name!r}' if self.name else ''
        return f'Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})'

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self) -> None:
        """
        Accumulate d(self)/d(param) into every reachable trainable Param.

        Raises:
            ShapeError: if self is not a scalar (size 1)
        """
        if self.data.size != 1:
            raise ShapeError(f'backward() needs a scalar loss, got shape {self.shape}')
        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if isinstance(node, Param):
                if node.trainable:
                    node.grad += g
                continue
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


class Param(Tensor):
    """A trainable leaf tensor with a persistent gradient buffer."""

    __slots__ = ('trainable',)

    def __init__(self, data, name: str = '', trainable: bool = True):
        super().__init__(data, requires_grad=trainable, name=name)
        self.trainable = trainable
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def set_trainable(self, trainable: bool) -> None:
        self.trainable = trainable
        self.requires_grad = trainable

    def assign(self, values) -> None:
        """Replace the values in place (shape must match)."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.data.shape:
            raise ShapeError(f'cannot assign shape {values.shape} to param {self.name!r} of shape {self.shape}')
        self.data = values.copy()


def _topological_order(root: Tensor) -> list[Tensor]:
    # iterative DFS; the graph of a 12-block tower is far deeper than the recursion limit
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def as_tensor(value) -> Tensor:
    """Wrap arrays/scalars as constant tensors; pass tensors through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward: GradFn) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward=backward)
    return Tensor(data)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (reverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# Elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data
    return _make(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data
    return _make(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data
    return _make(
        out,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def gelu(x) -> Tensor:
    """GELU, tanh form: 0.5 x (1 + tanh(c (x + 0.044715 x^3)))."""
    x = as_tensor(x)
    v = x.data
    inner = _GELU_C * (v + 0.044715 * v ** 3)
    t = np.tanh(inner)
    out = 0.5 * v * (1.0 + t)

    def backward(g):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * v ** 2)
        local = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t ** 2) * d_inner
        return (g * local,)

    return _make(out, (x,), backward)


# Linear algebra


def matmul(a, b) -> Tensor:
    """
    Matrix product over the last two axes.

    Raises:
        ShapeError: inner extents differ (message names both shapes)
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(
            f'matmul shape mismatch: {a.shape} x {b.shape}',
            details={'left': a.shape, 'right': b.shape},
        )
    out = np.matmul(a.data, b.data)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(out, (a, b), backward)


def transpose(x) -> Tensor:
    """Swap the last two axes."""
    x = as_tensor(x)
    return _make(np.swapaxes(x.data, -1, -2), (x,), lambda g: (np.swapaxes(g, -1, -2),))


def reshape(x, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    original = x.shape
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(original),))


# Normalisation


def row_softmax(x) -> Tensor:
    """Softmax along the last axis with row-max subtraction."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _make(out, (x,), backward)


def layer_norm(x, gain, bias, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale and shift."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        gxhat = g * gain.data
        n = x.shape[-1]
        gx = inv / n * (
            n * gxhat
            - gxhat.sum(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).sum(axis=-1, keepdims=True)
        )
        return gx, _unbroadcast(g * xhat, gain.shape), _unbroadcast(g, bias.shape)

    return _make(out, (x, gain, bias), backward)


class NormCounter:
    """Counts rows that hit the zero-norm guard in l2_normalize."""

    def __init__(self):
        self.zero_rows = 0


def l2_normalize(x, counter: NormCounter | None = None) -> Tensor:
    """
    Scale every row (last axis) to unit L2 norm.

    Zero-norm rows stay zero and carry zero gradient; each one increments
    `counter.zero_rows`.
    """
    x = as_tensor(x)
    norms = np.sqrt((x.data ** 2).sum(axis=-1, keepdims=True))
    zero = norms == 0.0
    if counter is not None:
        counter.zero_rows += int(zero.sum())
    safe = np.where(zero, 1.0, norms)
    out = np.where(zero, 0.0, x.data / safe)

    def backward(g):
        gx = (g - out * (g * out).sum(axis=-1, keepdims=True)) / safe
        return (np.where(zero, 0.0, gx),)

    return _make(out, (x,), backward)


# Reductions


def sum_(x, axis: int | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(np.asarray(out), (x,), backward)


def mean(x, axis: int | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else x.shape[axis]
    out = x.data.mean(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return _make(np.asarray(out), (x,), backward)


# Structural


def concat(tensors: Iterable, axis: int = -1) -> Tensor:
    """Concatenate along `axis` (rows: -2, features: -1)."""
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f'concat shape mismatch on axis {axis}: {[t.shape for t in tensors]}') from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _make(out, tuple(tensors), backward)


def slice_axis(x, start: int, stop: int, axis: int = -2) -> Tensor:
    """Contiguous slice [start, stop) along `axis`."""
    x = as_tensor(x)
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = x.data[index]

    def backward(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    return _make(out.copy(), (x,), backward)


def take(table, ids: np.ndarray) -> Tensor:
    """Embedding lookup: rows of a 2-D `table` selected by integer `ids` (any shape)."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    out = table.data[ids]

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
        return (full,)

    return _make(out, (table,), backward)


def gather_rows(x, indices: np.ndarray) -> Tensor:
    """
    Select rows per batch element.

    Args:
        x: (..., n, d)
        indices: (..., r) integer row indices, leading axes matching x
    """
    x = as_tensor(x)
    indices = np.asarray(indices, dtype=np.int64)
    expanded = np.broadcast_to(indices[..., None], indices.shape + (x.shape[-1],))
    out = np.take_along_axis(x.data, expanded, axis=-2)

    def backward(g):
        full = np.zeros_like(x.data)
        if x.ndim == 2:
            np.add.at(full, indices, g)
        else:
            lead = x.shape[:-2]
            flat_full = full.reshape((-1,) + x.shape[-2:])
            flat_idx = indices.reshape((-1, indices.shape[-1]))
            flat_g = g.reshape((-1,) + g.shape[-2:])
            for b in range(flat_full.shape[0]):
                np.add.at(flat_full[b], flat_idx[b], flat_g[b])
            full = flat_full.reshape(lead + x.shape[-2:])
        return (full,)

    return _make(out, (x,), backward)


def zeros(shape: tuple[int, ...]) -> Tensor:
    return Tensor(np.zeros(shape))
