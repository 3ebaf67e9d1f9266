"""Reverse-mode automatic differentiation over numpy arrays.

A Value wraps a float64 ndarray (a scalar is a 0-d array) and remembers how
it was produced. Calling backward() on a scalar output sweeps the tape in
reverse topological order and accumulates gradients into every reachable
Value. Gradients keep accumulating until zero_grad().
"""
from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcasted gradient back down to the operand's shape."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _acc(v, g):
    v.grad = g if v.grad is None else v.grad + g


class Value:
    __slots__ = ("data", "grad", "_parents", "_back", "op")

    def __init__(self, data, parents=(), op="const"):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None  # allocated lazily on first accumulation
        self._parents = parents
        self._back = None
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Value(op={self.op}, shape={self.data.shape})"

    # -- arithmetic -------------------------------------------------------

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

    def item(self) -> float:
        return float(self.data)


def as_value(x) -> Value:
    return x if isinstance(x, Value) else Value(x)


def add(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    out = Value(a.data + b.data, (a, b), "add")

    def back():
        _acc(a, _unbroadcast(out.grad, a.data.shape))
        _acc(b, _unbroadcast(out.grad, b.data.shape))

    out._back = back
    return out


def sub(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    out = Value(a.data - b.data, (a, b), "sub")

    def back():
        _acc(a, _unbroadcast(out.grad, a.data.shape))
        _acc(b, -_unbroadcast(out.grad, b.data.shape))

    out._back = back
    return out


def mul(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    out = Value(a.data * b.data, (a, b), "mul")

    def back():
        _acc(a, _unbroadcast(out.grad * b.data, a.data.shape))
        _acc(b, _unbroadcast(out.grad * a.data, b.data.shape))

    out._back = back
    return out


def div(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    out = Value(a.data / b.data, (a, b), "div")

    def back():
        _acc(a, _unbroadcast(out.grad / b.data, a.data.shape))
        _acc(b, _unbroadcast(-out.grad * a.data / (b.data * b.data),
                             b.data.shape))

    out._back = back
    return out


def neg(a) -> Value:
    a = as_value(a)
    out = Value(-a.data, (a,), "neg")

    def back():
        _acc(a, -out.grad)

    out._back = back
    return out


def exp(a) -> Value:
    a = as_value(a)
    out = Value(np.exp(a.data), (a,), "exp")

    def back():
        _acc(a, out.grad * out.data)

    out._back = back
    return out


def log(a) -> Value:
    a = as_value(a)
    out = Value(np.log(a.data), (a,), "log")

    def back():
        _acc(a, out.grad / a.data)

    out._back = back
    return out


def tanh(a) -> Value:
    a = as_value(a)
    out = Value(np.tanh(a.data), (a,), "tanh")

    def back():
        _acc(a, out.grad * (1.0 - out.data * out.data))

    out._back = back
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp(-|x|) never overflows; pick the matching branch per sign
    pos = 1.0 / (1.0 + np.exp(-np.abs(x)))
    return np.where(x >= 0, pos, 1.0 - pos)


def sigmoid(a) -> Value:
    a = as_value(a)
    out = Value(_sigmoid(a.data), (a,), "sigmoid")

    def back():
        _acc(a, out.grad * out.data * (1.0 - out.data))

    out._back = back
    return out


def relu(a) -> Value:
    a = as_value(a)
    out = Value(np.maximum(a.data, 0.0), (a,), "relu")

    def back():
        _acc(a, out.grad * (a.data > 0))

    out._back = back
    return out


def leaky_relu(a, slope: float = 0.2) -> Value:
    a = as_value(a)
    out = Value(np.where(a.data > 0, a.data, slope * a.data), (a,), "leaky_relu")

    def back():
        _acc(a, out.grad * np.where(a.data > 0, 1.0, slope))

    out._back = back
    return out


def max2(a, b) -> Value:
    """Elementwise maximum; on ties the gradient flows to the first operand."""
    a, b = as_value(a), as_value(b)
    first = a.data >= b.data
    out = Value(np.where(first, a.data, b.data), (a, b), "max2")

    def back():
        _acc(a, _unbroadcast(out.grad * first, a.data.shape))
        _acc(b, _unbroadcast(out.grad * ~first, b.data.shape))

    out._back = back
    return out


def matmul(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError("matmul operands must be at least 2-d")
    out = Value(a.data @ b.data, (a, b), "matmul")

    def back():
        _acc(a, _unbroadcast(out.grad @ b.data.swapaxes(-1, -2), a.data.shape))
        _acc(b, _unbroadcast(a.data.swapaxes(-1, -2) @ out.grad, b.data.shape))

    out._back = back
    return out


def vsum(a, axis=None, keepdims=False) -> Value:
    a = as_value(a)
    out = Value(a.data.sum(axis=axis, keepdims=keepdims), (a,), "sum")

    def back():
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _acc(a, np.broadcast_to(g, a.data.shape).copy())

    out._back = back
    return out


def vmean(a, axis=None, keepdims=False) -> Value:
    a = as_value(a)
    out = Value(a.data.mean(axis=axis, keepdims=keepdims), (a,), "mean")
    denom = a.data.size if axis is None else a.data.shape[axis]

    def back():
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _acc(a, np.broadcast_to(g, a.data.shape) / denom)

    out._back = back
    return out


def softmax(a, axis=-1) -> Value:
    a = as_value(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Value(s, (a,), "softmax")

    def back():
        g = out.grad
        _acc(a, (g - (g * s).sum(axis=axis, keepdims=True)) * s)

    out._back = back
    return out


def reshape(a, shape) -> Value:
    a = as_value(a)
    out = Value(a.data.reshape(shape), (a,), "reshape")

    def back():
        _acc(a, out.grad.reshape(a.data.shape))

    out._back = back
    return out


def transpose(a, axes) -> Value:
    a = as_value(a)
    out = Value(a.data.transpose(axes), (a,), "transpose")
    inv = np.argsort(axes)

    def back():
        _acc(a, out.grad.transpose(inv))

    out._back = back
    return out


def take(a, indices, axis=0) -> Value:
    """Gather along an axis with an integer index array."""
    a = as_value(a)
    indices = np.asarray(indices, dtype=np.intp)
    out = Value(np.take(a.data, indices, axis=axis), (a,), "take")

    def back():
        g = np.moveaxis(out.grad, axis, 0)
        acc = np.zeros(np.moveaxis(a.data, axis, 0).shape)
        np.add.at(acc, indices, g)
        _acc(a, np.moveaxis(acc, 0, axis))

    out._back = back
    return out


def concat(values, axis=-1) -> Value:
    values = [as_value(v) for v in values]
    out = Value(np.concatenate([v.data for v in values], axis=axis),
                tuple(values), "concat")
    sizes = [v.data.shape[axis] for v in values]
    offsets = np.cumsum([0] + sizes)

    def back():
        for v, lo, hi in zip(values, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * out.grad.ndim
            sl[axis if axis >= 0 else out.grad.ndim + axis] = slice(lo, hi)
            _acc(v, out.grad[tuple(sl)])

    out._back = back
    return out


def _toposort(root: Value):
    order, seen = [], set()
    stack = [(root, iter(root._parents))]
    seen.add(id(root))
    while stack:
        node, it = stack[-1]
        advanced = False
        for p in it:
            if id(p) not in seen:
                seen.add(id(p))
                stack.append((p, iter(p._parents)))
                advanced = True
                break
        if not advanced:
            order.append(node)
            stack.pop()
    return order


def backward(out: Value) -> None:
    """Seed the scalar output with gradient 1 and sweep the tape."""
    if out.data.size != 1:
        raise ValueError("backward requires a scalar output")
    _acc(out, np.ones_like(out.data))
    for node in reversed(_toposort(out)):
        if node._back is not None and node.grad is not None:
            node._back()


def zero_grad(out: Value) -> None:
    """Reset the gradient of every Value reachable from out."""
    for node in _toposort(out):
        node.grad = None


class Parameter:
    """A persistent leaf Value with a trainable flag.

    The wrapped Value is reused across tapes; optimizer steps mutate
    .value.data in place and read the accumulated .value.grad.
    """

    def __init__(self, data, trainable: bool = True, name: str = ""):
        self.value = Value(np.array(data, dtype=np.float64, order="C"))
        self.trainable = trainable
        self.name = name

    @property
    def data(self) -> np.ndarray:
        return self.value.data

    @property
    def grad(self) -> np.ndarray:
        if self.value.grad is None:
            return np.zeros_like(self.value.data)
        return self.value.grad

    @property
    def shape(self):
        return self.value.data.shape

    @property
    def size(self) -> int:
        return self.value.data.size

    def zero_grad(self):
        self.value.grad = None


def finite_difference_check(f, params, h: float = 1e-5) -> float:
    """Max relative error between backward() gradients and central differences.

    f maps the parameter list to a scalar Value; it must be deterministic.
    """
    for p in params:
        p.zero_grad()
    out = f(params)
    backward(out)
    analytic = [p.grad.copy() for p in params]
    max_rel = 0.0
    for p, g in zip(params, analytic):
        data = p.value.data
        # multi-index perturbation works for any memory layout
        for idx in np.ndindex(*data.shape) if data.shape else ((),):
            orig = data[idx]
            data[idx] = orig + h
            fp = float(f(params).data)
            data[idx] = orig - h
            fm = float(f(params).data)
            data[idx] = orig
            numeric = (fp - fm) / (2.0 * h)
            rel = abs(numeric - g[idx]) / max(abs(g[idx]), abs(numeric), 1.0)
            max_rel = max(max_rel, rel)
    return max_rel
