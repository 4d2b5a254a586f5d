"""Reverse-mode differentiation over numpy arrays.

Every op builds a node holding its parents and a closure mapping the output
cotangent to one cotangent per parent.  Nodes are only recorded when some
input requires a gradient, so the same op functions double as a plain
forward evaluator.
"""

from __future__ import annotations

import numpy as np

from .._core import sep2d
from ..errors import UsageError


class Tensor:
    __slots__ = ("data", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def param(data, name: str) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def const(data) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(data)


def _node(data, parents, backward) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, None, tuple(parents), backward)
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = const(a), const(b)
    return _node(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = const(a), const(b)
    return _node(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = const(a), const(b)
    return _node(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def matmul(a, b) -> Tensor:
    a, b = const(a), const(b)
    if a.ndim < 2 or b.ndim < 2:
        raise UsageError("matmul operands must be at least 2-D")

    def back(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _node(np.matmul(a.data, b.data), (a, b), back)


def reshape(a, shape) -> Tensor:
    a = const(a)
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes) -> Tensor:
    a = const(a)
    inv = np.argsort(axes)
    return _node(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def sum_all(a) -> Tensor:
    a = const(a)
    return _node(np.sum(a.data), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean_all(a) -> Tensor:
    a = const(a)
    n = a.data.size
    return _node(np.mean(a.data), (a,), lambda g: (np.full(a.shape, g / n),))


def square(a) -> Tensor:
    a = const(a)
    return _node(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def softmax(a, axis=-1) -> Tensor:
    a = const(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (s * (g - np.sum(g * s, axis=axis, keepdims=True)),)

    return _node(s, (a,), back)


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(a) -> Tensor:
    """tanh approximation."""
    a = const(a)
    x = a.data
    inner = _GELU_C * (x + 0.044715 * (x * x * x))
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def back(g):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * (x * x))
        d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner
        return (g * d,)

    return _node(out, (a,), back)


def layer_norm(x, gamma, beta, eps=1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    x, gamma, beta = const(x), const(gamma), const(beta)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def back(g):
        gxhat = g * gamma.data
        gx = inv * (
            gxhat
            - gxhat.mean(axis=-1, keepdims=True)
            - xhat * np.mean(gxhat * xhat, axis=-1, keepdims=True)
        )
        ggamma = _unbroadcast(g * xhat, gamma.shape)
        gbeta = _unbroadcast(g, beta.shape)
        return gx, ggamma, gbeta

    return _node(out, (x, gamma, beta), back)


def upsample_nearest(a, p: int) -> Tensor:
    """(B, h, w, K) -> (B, h*p, w*p, K) by block replication."""
    a = const(a)
    B, h, w, K = a.shape
    out = np.repeat(np.repeat(a.data, p, axis=1), p, axis=2)

    def back(g):
        return (g.reshape(B, h, p, w, p, K).sum(axis=(2, 4)),)

    return _node(out, (a,), back)


def cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood over every leading position, stabilized by max subtraction."""
    logits = const(logits)
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.data
    K = z.shape[-1]
    if labels.shape != z.shape[:-1]:
        raise UsageError(f"labels shape {labels.shape} does not match logits {z.shape}")
    zmax = z.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z - zmax).sum(axis=-1, keepdims=True)) + zmax
    logp = z - lse
    picked = np.take_along_axis(logp, labels[..., None], axis=-1)
    n = labels.size
    loss = -picked.sum() / n

    def back(g):
        p = np.exp(logp)
        onehot = np.eye(K)[labels]
        return ((p - onehot) * (g / n),)

    return _node(loss, (logits,), back)


def linear_terms(parts, terms) -> list[Tensor]:
    """Apply a separable term table (see ``spectral.forward_terms``) to tensors of shape (n, H, W, c)."""
    parts = [const(p) for p in parts]
    outs = []
    for row in terms:
        acc = None
        for x, cell in zip(parts, row):
            for coef, a, b in cell:
                y = sep2d(x.data, a, b)
                if coef != 1.0:
                    y = coef * y
                acc = y if acc is None else acc + y

        def back(g, row=row):
            grads = []
            for cell in row:
                gx = None
                for coef, a, b in cell:
                    y = sep2d(g, a.T, b.T)
                    if coef != 1.0:
                        y = coef * y
                    gx = y if gx is None else gx + y
                grads.append(gx)
            return tuple(grads)

        outs.append(_node(acc, parts, back))
    return outs


def _toposort(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
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
    return order[::-1]


def backward(loss: Tensor, wrt=None) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every named leaf that requires grad.

    Leaves that take part in the graph but receive no cotangent get a zero
    entry so the mapping always covers every recorded trainable parameter.
    """
    if not isinstance(loss, Tensor) or not loss.requires_grad:
        raise UsageError("loss was not recorded against any trainable parameter")
    if loss.data.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
    order = _toposort(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    out: dict[str, np.ndarray] = {}
    for node in order:
        g = grads.pop(id(node), None)
        if node._backward is None:
            if node.name is not None:
                if node.name in out:
                    raise UsageError(f"two leaves share the parameter name {node.name!r}")
                out[node.name] = np.zeros_like(node.data) if g is None else g
            continue
        if g is None:
            continue
        for p, gp in zip(node._parents, node._backward(g)):
            if not p.requires_grad or gp is None:
                continue
            prev = grads.get(id(p))
            grads[id(p)] = gp if prev is None else prev + gp
    if wrt is not None:
        missing = [k for k in wrt if k not in out]
        if missing:
            raise UsageError(f"parameters not reached by the loss: {missing}")
        out = {k: out[k] for k in wrt}
    return out
