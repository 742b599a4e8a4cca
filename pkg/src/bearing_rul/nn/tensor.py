"""Reverse-mode automatic differentiation over dense float64 arrays.

Every operation records its parents and a closure mapping the output
gradient to parent gradients. ``Tensor.backward`` walks the recorded graph
in reverse topological order and frees it afterwards, so a second call on
the same graph raises.
"""
from __future__ import annotations

import numpy as np

DTYPE = np.float64


class GraphError(RuntimeError):
    """Raised on misuse of the autodiff graph (non-scalar or reused backward)."""


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    ndim_extra = grad.ndim - len(shape)
    if ndim_extra > 0:
        grad = grad.sum(axis=tuple(range(ndim_extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def as_tensor(x) -> "Tensor":
    return x if isinstance(x, Tensor) else Tensor(x)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_freed")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents = _parents
        self._backward = _backward
        self._freed = False

    # -- construction helpers -------------------------------------------------
    @classmethod
    def _make(cls, data, parents, backward):
        parents = tuple(parents)
        req = any(p.requires_grad for p in parents)
        if not req:
            return cls(data)
        return cls(data, requires_grad=True, _parents=parents, _backward=backward)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def T(self):
        return self.transpose()

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def detach(self):
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        tag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{tag})"

    def __len__(self):
        return len(self.data)

    # -- backward -------------------------------------------------------------
    def backward(self, inputs=None):
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every leaf.

        ``inputs`` optionally lists leaves that must end up with a gradient
        array even when unreachable from ``self``; those receive zeros.
        """
        if self.data.size != 1:
            raise GraphError(f"backward needs a scalar, got shape {self.shape}")
        if self._freed:
            raise GraphError("graph already consumed by an earlier backward(); rebuild it")

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

        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if node._backward is None:
                if node.requires_grad and g is not None:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            if g is None:
                continue
            parent_grads = node._backward(g)
            for p, pg in zip(node._parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        for node in order:
            if node._backward is not None:
                node._backward = None
                node._parents = ()
                node._freed = True
        if inputs is not None:
            for leaf in inputs:
                if leaf.grad is None:
                    leaf.grad = np.zeros_like(leaf.data)

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def bw(g):
            return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

        return Tensor._make(a.data + b.data, (a, b), bw)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def bw(g):
            return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

        return Tensor._make(a.data - b.data, (a, b), bw)

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def bw(g):
            return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

        return Tensor._make(a.data * b.data, (a, b), bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def bw(g):
            return (_unbroadcast(g / b.data, a.shape),
                    _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

        return Tensor._make(a.data / b.data, (a, b), bw)

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,))

    def __pow__(self, p):
        if isinstance(p, Tensor):
            raise TypeError("only scalar exponents are supported")
        a = self

        def bw(g):
            return (g * p * a.data ** (p - 1),)

        return Tensor._make(a.data ** p, (a,), bw)

    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self, other
        if a.ndim < 2 or b.ndim < 2:
            raise ValueError("matmul operands must be at least 2-D")

        def bw(g):
            ga = g @ np.swapaxes(b.data, -1, -2)
            gb = np.swapaxes(a.data, -1, -2) @ g
            return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

        return Tensor._make(a.data @ b.data, (a, b), bw)

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    # -- reductions and shape -------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        a = self

        def bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, a.shape).copy(),)

        return Tensor._make(a.data.sum(axis=axis, keepdims=keepdims), (a,), bw)

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            n = self.data.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            n = int(np.prod([self.shape[i] for i in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        return Tensor._make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inv = tuple(np.argsort(axes))
        a = self
        return Tensor._make(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))

    def __getitem__(self, idx):
        if isinstance(idx, Tensor):
            idx = idx.data.astype(np.intp)
        a = self

        def bw(g):
            out = np.zeros_like(a.data)
            np.add.at(out, idx, g)
            return (out,)

        return Tensor._make(a.data[idx], (a,), bw)

    # -- elementwise functions ------------------------------------------------
    def exp(self):
        out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out,))

    def log(self):
        a = self
        return Tensor._make(np.log(a.data), (a,), lambda g: (g / a.data,))

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor._make(out, (self,), lambda g: (g * (1.0 - out * out),))

    def sigmoid(self):
        x = self.data
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return Tensor._make(out, (self,), lambda g: (g * out * (1.0 - out),))

    def relu(self):
        mask = self.data > 0
        return Tensor._make(self.data * mask, (self,), lambda g: (g * mask,))

    def clamp_min(self, lo):
        mask = self.data >= lo
        return Tensor._make(np.where(mask, self.data, lo), (self,), lambda g: (g * mask,))

    def softmax(self, axis=-1):
        x = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(x)
        out = e / e.sum(axis=axis, keepdims=True)

        def bw(g):
            return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

        return Tensor._make(out, (self,), bw)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis), tensors, bw)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def bw(g):
        return tuple(np.moveaxis(g, axis, 0))

    return Tensor._make(np.stack([t.data for t in tensors], axis=axis), tensors, bw)


def pad(x, widths, mode="constant"):
    """Pad with zeros (``constant``) or by repeating the border (``edge``)."""
    widths = [tuple(w) for w in widths]
    slices = tuple(slice(lo, lo + n) for (lo, _), n in zip(widths, x.shape))

    if mode == "constant":
        def bw(g):
            return (g[slices],)
    elif mode == "edge":
        def bw(g):
            # fold padded borders back onto the edge entries, axis by axis
            for ax, (lo, hi) in enumerate(widths):
                if lo == 0 and hi == 0:
                    continue
                g = np.moveaxis(g, ax, 0).copy()
                n = g.shape[0] - lo - hi
                if lo:
                    g[lo] += g[:lo].sum(0)
                if hi:
                    g[lo + n - 1] += g[lo + n:].sum(0)
                g = np.moveaxis(g[lo:lo + n], 0, ax)
            return (g,)
    else:
        raise ValueError(f"unknown pad mode {mode!r}")
    return Tensor._make(np.pad(x.data, widths, mode=mode), (x,), bw)
