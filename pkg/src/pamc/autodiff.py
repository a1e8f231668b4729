"""Reverse-mode differentiation over numpy arrays.

A :class:`Tensor` wraps an array and remembers the operation that produced
it. Calling :meth:`Tensor.backward` on a scalar walks the recorded graph in
reverse topological order and accumulates gradients into every tensor that
requires them.

Gradient policy: leaf gradients *accumulate* across backward passes until
:func:`zero_grad` is called (so ``(a + b).backward()`` after ``a.backward()``
sums both). A given result tensor can only be back-propagated once; a second
call raises ``RuntimeError`` because its intermediate buffers are already
spent.
"""
import numpy as np

from .numerics import DimensionError, NumericalError


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "_spent")

    def __init__(self, value, requires_grad=False, _parents=(), _backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward = _backward
        self._spent = False

    @property
    def shape(self):
        return self.value.shape

    @property
    def is_leaf(self):
        return not self._parents

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"

    def detach(self):
        return Tensor(self.value.copy())

    def backward(self):
        if self.value.size != 1:
            raise ValueError(f"backward() needs a scalar loss, got shape {self.value.shape}")
        if self._spent:
            raise RuntimeError("backward() already called on this result")
        self._spent = True
        if not self.requires_grad:
            return

        order = _topological_order(self)
        grads = {id(self): np.ones_like(self.value)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    @property
    def T(self):
        return transpose(self)


def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
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
    return order


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(x):
    """Leaf tensor that receives gradients."""
    return Tensor(np.array(x, dtype=np.float64, copy=True), requires_grad=True)


def make_op(value, parents, backward):
    """Record a result whose gradient rule is ``backward(g) -> grads per parent``."""
    parents = tuple(parents)
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Tensor(value)
    return Tensor(value, requires_grad=True, _parents=parents, _backward=backward)


def zero_grad(params):
    for p in params:
        p.grad = None


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# elementwise arithmetic ------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return make_op(a.value + b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return make_op(a.value - b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return make_op(a.value * b.value, (a, b),
                   lambda g: (_unbroadcast(g * b.value, a.shape),
                              _unbroadcast(g * a.value, b.shape)))


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.value / b.value

    def backward(g):
        ga = _unbroadcast(g / b.value, a.shape)
        gb = _unbroadcast(-g * out / b.value, b.shape)
        return ga, gb

    return make_op(out, (a, b), backward)


def neg(a):
    a = as_tensor(a)
    return make_op(-a.value, (a,), lambda g: (-g,))


def power(a, exponent):
    a = as_tensor(a)
    exponent = float(exponent)
    out = a.value ** exponent
    return make_op(out, (a,), lambda g: (g * exponent * a.value ** (exponent - 1.0),))


def square(a):
    a = as_tensor(a)
    return make_op(a.value * a.value, (a,), lambda g: (2.0 * g * a.value,))


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.value)
    return make_op(out, (a,), lambda g: (g * out,))


def log(a):
    a = as_tensor(a)
    return make_op(np.log(a.value), (a,), lambda g: (g / a.value,))


def relu(a):
    a = as_tensor(a)
    mask = a.value > 0.0
    return make_op(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def clamp_min(a, lo):
    """``max(a, lo)``; zero gradient where clamped."""
    a = as_tensor(a)
    mask = a.value >= lo
    return make_op(np.where(mask, a.value, lo), (a,), lambda g: (g * mask,))


# linear algebra and reductions ----------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return make_op(a.value @ b.value, (a, b),
                   lambda g: (g @ b.value.T, a.value.T @ g))


def transpose(a):
    a = as_tensor(a)
    return make_op(a.value.T.copy(), (a,), lambda g: (g.T,))


def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    a = as_tensor(a)
    out = a.value.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_op(out, (a,), backward)


def mean(a, axis=None):
    a = as_tensor(a)
    n = a.value.size if axis is None else a.shape[axis]
    return mul(sum(a, axis=axis), 1.0 / n)


def logsumexp(a, axis=None, mask=None):
    """Stable ``log(sum(exp(a)))`` restricted to entries where ``mask`` is True."""
    a = as_tensor(a)
    x = a.value
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        x = np.where(mask, x, -np.inf)
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(x - m)
    s = e.sum(axis=axis, keepdims=True)
    out_k = np.log(s) + m
    out = out_k if axis is None else np.squeeze(out_k, axis=axis)
    if axis is None:
        out = out.reshape(())

    def backward(g):
        gk = np.reshape(g, out_k.shape)
        return (gk * e / s,)

    return make_op(out, (a,), backward)


# fused geometric ops ----------------------------------------------------------

def row_normalize(a, eps=1e-12):
    """Rows scaled to unit norm; norms below ``eps`` are treated as ``eps``."""
    a = as_tensor(a)
    norms = np.sqrt(np.einsum("ij,ij->i", a.value, a.value))[:, None]
    small = norms < eps
    denom = np.where(small, eps, norms)
    out = a.value / denom

    def backward(g):
        radial = np.einsum("ij,ij->i", out, g)[:, None]
        gin = np.where(small, g, g - out * radial) / denom
        return (gin,)

    return make_op(out, (a,), backward)


def pairwise_sqdist(a, b):
    """``d[i, u] = ||a_i - b_u||^2`` evaluated by explicit differences."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"feature dims differ: {a.shape} vs {b.shape}")
    diff = a.value[:, None, :] - b.value[None, :, :]
    out = np.einsum("iuk,iuk->iu", diff, diff)

    def backward(g):
        w = 2.0 * g[:, :, None] * diff
        return w.sum(axis=1), -w.sum(axis=0)

    return make_op(out, (a, b), backward)


def grad_check(f, x, eps=1e-5, entries=None):
    """Largest relative gap between backward() and central differences.

    ``f`` maps a :class:`Tensor` to a scalar :class:`Tensor`. The relative
    error per entry is ``|a - n| / max(|a|, |n|, 1e-8)``. ``entries``
    restricts the comparison to those flat indices (for large parameters).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.array(x, dtype=np.float64, copy=True)
    xt = parameter(x)
    f(xt).backward()
    analytic = np.zeros_like(x) if xt.grad is None else xt.grad

    flat = x.reshape(-1)
    idx = np.arange(flat.size) if entries is None else np.asarray(entries, dtype=np.int64)
    analytic = analytic.reshape(-1)[idx]
    numeric = np.empty(idx.size)
    for pos, k in enumerate(idx):
        orig = flat[k]
        flat[k] = orig + eps
        fp = float(f(Tensor(x)).value)
        flat[k] = orig - eps
        fm = float(f(Tensor(x)).value)
        flat[k] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalError(f"non-finite function value at perturbed entry {k}")
        numeric[pos] = (fp - fm) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


class Adam:
    """Adam with bias correction; updates tensors in place from ``.grad``."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def zero_grad(self):
        zero_grad(self.params)

    def step(self):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            m *= self.b1
            m += (1.0 - self.b1) * p.grad
            v *= self.b2
            v += (1.0 - self.b2) * p.grad * p.grad
            p.value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
