"""Reverse-mode autodiff over numpy arrays.

Small and specialized: exactly the ops the sequence models need (matmul,
elementwise nonlinearities, softmax/log-softmax, gather/concat/slice/pad,
reductions).  Graphs are built on the fly; Tensor.backward() runs a single
reverse sweep accumulating into .grad of every reachable node that requires
gradients.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad, shape):
    """Sum grad down to `shape` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_vjps")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._vjps = ()  # ((parent, vjp_fn), ...)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data, vjps):
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out._vjps = tuple((p, f) for p, f in vjps if p.requires_grad)
        out.requires_grad = bool(out._vjps)
        return out

    def backward(self):
        """Accumulate gradients of this scalar into all reachable leaves."""
        if self.data.shape != ():
            raise ValueError("backward() expects a scalar")
        topo, seen, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent, _ in node._vjps:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node.grad is None:
                continue
            g = node.grad
            for parent, vjp in node._vjps:
                pg = vjp(g)
                if parent.grad is None:
                    parent.grad = pg
                else:
                    parent.grad += pg

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return Tensor._make(
            a.data + b.data,
            ((a, lambda g: _unbroadcast(g, a.data.shape)),
             (b, lambda g: _unbroadcast(g, b.data.shape))),
        )

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return Tensor._make(
            a.data - b.data,
            ((a, lambda g: _unbroadcast(g, a.data.shape)),
             (b, lambda g: _unbroadcast(-g, b.data.shape))),
        )

    def __neg__(self):
        return Tensor._make(-self.data, ((self, lambda g: -g),))

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return Tensor._make(
            a.data * b.data,
            ((a, lambda g: _unbroadcast(g * b.data, a.data.shape)),
             (b, lambda g: _unbroadcast(g * a.data, b.data.shape))),
        )

    __rmul__ = __mul__

    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self, other
        out = a.data @ b.data

        def vjp_a(g):
            return _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape)

        def vjp_b(g):
            return _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape)

        return Tensor._make(out, ((a, vjp_a), (b, vjp_b)))

    def __getitem__(self, key):
        data = self.data[key]

        def vjp(g):
            z = np.zeros_like(self.data)
            z[key] = g
            return z

        return Tensor._make(data, ((self, vjp),))

    # -- shape --------------------------------------------------------------

    def reshape(self, *shape):
        old = self.data.shape
        return Tensor._make(
            self.data.reshape(*shape), ((self, lambda g: g.reshape(old)),)
        )

    def swap(self, ax1=-1, ax2=-2):
        return Tensor._make(
            np.swapaxes(self.data, ax1, ax2),
            ((self, lambda g: np.swapaxes(g, ax1, ax2)),),
        )

    # -- reductions ---------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        data = self.data.sum(axis=axis, keepdims=keepdims)
        shape = self.data.shape

        def vjp(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return np.broadcast_to(g, shape).copy()

        return Tensor._make(data, ((self, vjp),))

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


# -- nonlinearities ----------------------------------------------------------

def tanh(x):
    y = np.tanh(x.data)
    return Tensor._make(y, ((x, lambda g: g * (1.0 - y * y)),))


def sigmoid(x):
    y = 1.0 / (1.0 + np.exp(-x.data))
    return Tensor._make(y, ((x, lambda g: g * y * (1.0 - y)),))


def softmax(x):
    """Softmax over the last axis."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        return y * (g - (g * y).sum(axis=-1, keepdims=True))

    return Tensor._make(y, ((x, vjp),))


def log_softmax(x):
    """Log-softmax over the last axis, numerically stable."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    y = z - lse

    def vjp(g):
        return g - np.exp(y) * g.sum(axis=-1, keepdims=True)

    return Tensor._make(y, ((x, vjp),))


# -- structure ---------------------------------------------------------------

def concat(tensors, axis):
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    offsets = np.cumsum([d.shape[axis] for d in datas])[:-1]

    vjps = []
    for i, t in enumerate(tensors):
        def vjp(g, i=i):
            return np.split(g, offsets, axis=axis)[i]
        vjps.append((t, vjp))
    return Tensor._make(out, vjps)


def stack(tensors, axis):
    out = np.stack([t.data for t in tensors], axis=axis)
    vjps = [
        (t, lambda g, i=i: np.take(g, i, axis=axis)) for i, t in enumerate(tensors)
    ]
    return Tensor._make(out, vjps)


def rows(table, ids):
    """Gather rows of a 2-D table: result shape ids.shape + (dim,)."""
    ids = np.asarray(ids)
    data = table.data[ids]

    def vjp(g):
        z = np.zeros_like(table.data)
        np.add.at(z, ids, g)
        return z

    return Tensor._make(data, ((table, vjp),))


def take_label(x, ids):
    """Pick x[..., ids[...]] along the last axis; result drops that axis."""
    ids = np.asarray(ids)
    data = np.take_along_axis(x.data, ids[..., None], axis=-1)[..., 0]

    def vjp(g):
        z = np.zeros_like(x.data)
        flat = z.reshape(-1, z.shape[-1])
        flat[np.arange(flat.shape[0]), ids.reshape(-1)] = g.reshape(-1)
        return z

    return Tensor._make(data, ((x, vjp),))


def pad_time(x, left, right):
    """Zero-pad along axis 1 of a (B, T, C) tensor."""
    data = np.pad(x.data, ((0, 0), (left, right), (0, 0)))
    T = x.data.shape[1]

    def vjp(g):
        return g[:, left:left + T, :]

    return Tensor._make(data, ((x, vjp),))


def assert_finite(value, what="value"):
    arr = value.data if isinstance(value, Tensor) else np.asarray(value)
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite {what}")
    return value
