"""A small numpy-backed tensor with reverse-mode differentiation.

Each differentiable op records its parents and a closure mapping the
upstream gradient to one gradient per parent.  :meth:`Tensor.backward`
walks the graph in reverse topological order and accumulates into
``.grad`` (additively, so repeated calls without zeroing sum up).
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError


class Tensor:
    __array_priority__ = 1000

    def __init__(self, data, requires_grad=False, parents=(), grad_fn=None, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._parents = parents
        self._grad_fn = grad_fn

    # -- basics --------------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.item())

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    # -- graph traversal -----------------------------------------------------
    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without an explicit gradient needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
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
            node.grad = g.copy() if node.grad is None else node.grad + g
            if node._grad_fn is None:
                continue
            for parent, pg in zip(node._parents, node._grad_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    # -- operators -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __rtruediv__(self, other):
        return mul(as_tensor(other), power(self, -1.0))

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name=None):
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def _make(data, parents, grad_fn):
    requires = any(p.requires_grad for p in parents)
    return Tensor(data, requires, parents if requires else (), grad_fn if requires else None)


def unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- elementwise -------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def neg(a):
    return _make(-a.data, (a,), lambda g: (-g,))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)))


def power(a, exponent):
    exponent = float(exponent)
    out = a.data ** exponent
    return _make(out, (a,), lambda g: (g * exponent * a.data ** (exponent - 1.0),))


def exp(a):
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def log(a):
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a):
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (g * 0.5 / out,))


def tanh(a):
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a):
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a):
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def clip(a, lo=None, hi=None):
    """Clamp with zero gradient outside [lo, hi]."""
    out = np.clip(a.data, lo, hi)
    inside = out == a.data
    return _make(out, (a,), lambda g: (g * inside,))


def maximum(a, floor):
    """max(a, floor) for a scalar floor; gradient passes where a > floor."""
    keep = a.data > floor
    return _make(np.where(keep, a.data, floor), (a,), lambda g: (g * keep,))


# -- reductions and shape ops ------------------------------------------------

def _expand(g, shape, axis, keepdims):
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def tsum(a, axis=None, keepdims=False):
    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,),
                 lambda g: (_expand(g, a.shape, axis, keepdims).copy(),))


def tmean(a, axis=None, keepdims=False):
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return _make(a.data.mean(axis=axis, keepdims=keepdims), (a,),
                 lambda g: (_expand(g, a.shape, axis, keepdims) / count,))


def reshape(a, shape):
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes=None):
    inverse = None if axes is None else np.argsort(axes)
    return _make(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def getitem(a, index):
    parts = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(i, (slice, int, type(None), type(Ellipsis))) for i in parts)

    def grad_fn(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)
    return _make(a.data[index], (a,), grad_fn)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def grad_fn(g):
        return tuple(np.split(g, sizes, axis=axis))
    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), grad_fn)


def split(a, sections, axis=0):
    n = a.shape[axis] // sections
    idx = [slice(None)] * a.ndim
    parts = []
    for i in range(sections):
        idx[axis] = slice(i * n, (i + 1) * n)
        parts.append(getitem(a, tuple(idx)))
    return parts


def softmax(a, axis=-1):
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)
    return _make(out, (a,), grad_fn)


# -- linear algebra ----------------------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul expects (m,k)@(k,n), got {a.shape} @ {b.shape}")
    return _make(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def linear(x, weight, bias=None):
    """``x @ weight.T + bias`` over the last axis; x may carry leading batch dims."""
    x = as_tensor(x)
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"linear: input width {x.shape[-1]} != weight in-features {weight.shape[1]}")
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def grad_fn(g):
        g2 = g.reshape(-1, g.shape[-1])
        x2 = x.data.reshape(-1, x.shape[-1])
        grads = [g @ weight.data, g2.T @ x2]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)
    return _make(out, parents, grad_fn)


def conv1d(x, weight, bias=None, dilation=1):
    """Same-length dilated 1-D convolution with zero padding.

    x: (B, C_in, T) or (C_in, T); weight: (C_out, C_in, K) with K odd.
    out[b, c, t] = bias[c] + sum_{i,k} w[c, i, k] * x[b, i, t + (k - K//2) * dilation]
    """
    x = as_tensor(x)
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    c_out, c_in, k = weight.shape
    if xd.ndim != 3 or xd.shape[1] != c_in:
        raise ShapeError(f"conv1d: input {x.shape} incompatible with weight {weight.shape}")
    if k % 2 == 0:
        raise ShapeError(f"conv1d kernel must be odd, got {k}")
    b, t = xd.shape[0], xd.shape[2]
    pad = dilation * (k // 2)
    xp = np.pad(xd, ((0, 0), (0, 0), (pad, pad)))
    # im2col: (B, C_in * K, T) with column index i * K + j
    cols = np.stack([xp[:, :, j * dilation:j * dilation + t] for j in range(k)], axis=2).reshape(b, c_in * k, t)
    w2 = weight.data.reshape(c_out, c_in * k)
    out = np.matmul(w2, cols)
    if bias is not None:
        out += bias.data[None, :, None]
    parents = (x, weight) if bias is None else (x, weight, bias)

    def grad_fn(g):
        g3 = g[None] if squeeze else g
        gw = np.matmul(g3, cols.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape)
        gcols = np.matmul(w2.T, g3).reshape(b, c_in, k, t)
        gxp = np.zeros_like(xp)
        for j in range(k):
            gxp[:, :, j * dilation:j * dilation + t] += gcols[:, :, j]
        gx = gxp[:, :, pad:pad + t]
        grads = [gx[0] if squeeze else gx, gw]
        if bias is not None:
            grads.append(g3.sum(axis=(0, 2)))
        return tuple(grads)
    return _make(out[0] if squeeze else out, parents, grad_fn)
