"""Minimal reverse-mode automatic differentiation over dense numpy arrays.

A define-by-run tape: every operation produces a new :class:`Tensor` that
remembers its parents and a backward closure.  Graphs are rebuilt on every
forward pass, so variable-length sequences need no special casing.  A single
graph is meant to be used from one thread; independent graphs are fine on
separate threads.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

_DEFAULT_DTYPE = np.float64


def set_default_dtype(dtype) -> None:
    """Set the dtype newly created tensors default to (float64 or float32)."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError(f"unsupported dtype {dtype}")
    _DEFAULT_DTYPE = dtype.type


def default_dtype():
    return _DEFAULT_DTYPE


class GraphError(ValueError):
    """Raised on graph-construction problems (shape mismatch, bad loss)."""


class Tensor:
    __slots__ = ("value", "grad", "_parents", "_backward", "requires_grad")

    def __init__(self, value, parents=(), backward=None, requires_grad=False,
                 dtype=None):
        self.value = np.asarray(value, dtype=dtype or _DEFAULT_DTYPE)
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, grad={self.grad is not None})"

    # operator sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)


class Parameter(Tensor):
    """A named trainable leaf.  Gradients accumulate into ``.grad``."""

    __slots__ = ("name",)

    def __init__(self, name: str, value):
        super().__init__(np.asarray(value, dtype=_DEFAULT_DTYPE),
                         requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _op(value: np.ndarray, parents: tuple, backward: Callable) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(value, parents=parents, backward=backward,
                      requires_grad=True)
    return Tensor(value)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# core ops ---------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.value + b.value
    return _op(out, (a, b),
               lambda g: (_unbroadcast(g, a.value.shape),
                          _unbroadcast(g, b.value.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.value - b.value
    return _op(out, (a, b),
               lambda g: (_unbroadcast(g, a.value.shape),
                          _unbroadcast(-g, b.value.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.value * b.value

    def backward(g):
        ga = (_unbroadcast(g * b.value, a.value.shape)
              if a.requires_grad else None)
        gb = (_unbroadcast(g * a.value, b.value.shape)
              if b.requires_grad else None)
        return (ga, gb)

    return _op(out, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.value / b.value
    return _op(out, (a, b),
               lambda g: (_unbroadcast(g / b.value, a.value.shape),
                          _unbroadcast(-g * a.value / b.value ** 2,
                                       b.value.shape)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _op(-a.value, (a,), lambda g: (-g,))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim < 2 or b.value.ndim < 2:
        raise GraphError("matmul requires rank >= 2 operands")
    if a.value.shape[-1] != b.value.shape[-2]:
        raise GraphError(
            f"matmul shape mismatch: {a.value.shape} @ {b.value.shape}")
    out = np.matmul(a.value, b.value)

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.value, -1, -2)),
                              a.value.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.value, -1, -2), g),
                              b.value.shape)
        return (ga, gb)

    return _op(out, (a, b), backward)


def linear(x, w, b=None) -> Tensor:
    """x (..., in) @ w (in, out) + b, flattened to one GEMM."""
    x, w = as_tensor(x), as_tensor(w)
    if x.value.shape[-1] != w.value.shape[0]:
        raise GraphError(
            f"linear shape mismatch: {x.value.shape} @ {w.value.shape}")
    x2 = x.value.reshape(-1, x.value.shape[-1])
    out2 = x2 @ w.value
    if b is not None:
        b = as_tensor(b)
        out2 = out2 + b.value
    out = out2.reshape(x.value.shape[:-1] + (w.value.shape[1],))

    def backward(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = (g2 @ w.value.T).reshape(x.value.shape) \
            if x.requires_grad else None
        gw = x2.T @ g2 if w.requires_grad else None
        if b is None:
            return (gx, gw)
        gb = _unbroadcast(g2.sum(axis=0), b.value.shape) \
            if b.requires_grad else None
        return (gx, gw, gb)

    parents = (x, w) if b is None else (x, w, b)
    return _op(out, parents, backward)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    inv = np.argsort(axes)
    return _op(np.transpose(a.value, axes), (a,),
               lambda g: (np.transpose(g, inv),))


def swapaxes(a, ax1, ax2) -> Tensor:
    a = as_tensor(a)
    return _op(np.swapaxes(a.value, ax1, ax2), (a,),
               lambda g: (np.swapaxes(g, ax1, ax2),))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _op(a.value.reshape(shape), (a,),
               lambda g: (g.reshape(a.value.shape),))


def expand(a, shape) -> Tensor:
    """Broadcast to ``shape`` without copying; gradient sums back."""
    a = as_tensor(a)
    return _op(np.broadcast_to(a.value, shape), (a,),
               lambda g: (_unbroadcast(g, a.value.shape),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.value for t in tensors], axis=axis)
    sizes = [t.value.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    return _op(out, tuple(tensors),
               lambda g: tuple(np.split(g, splits, axis=axis)))


def take(a, idx) -> Tensor:
    """Basic and integer-array indexing with scatter-add backward."""
    a = as_tensor(a)
    out = a.value[idx]

    def backward(g):
        ga = np.zeros_like(a.value)
        np.add.at(ga, idx, g)
        return (ga,)

    return _op(out, (a,), backward)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.value)
    return _op(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return _op(np.log(a.value), (a,), lambda g: (g / a.value,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.value)
    return _op(out, (a,), lambda g: (g / (2.0 * out),))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _op(a.value ** 2, (a,), lambda g: (2.0 * a.value * g,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.value)
    return _op(out, (a,), lambda g: (g * (1.0 - out ** 2),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.value > 0
    return _op(a.value * mask, (a,), lambda g: (g * mask,))


def abs_(a) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.value)
    return _op(np.abs(a.value), (a,), lambda g: (g * sign,))


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out = a.value.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.value.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.value.shape).copy(),)

    return _op(out, (a,), backward)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.value.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = 1
        for ax in axes:
            count *= a.value.shape[ax]
    return sum_(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def softmax(a, axis: int = -1) -> Tensor:
    """Row softmax with max-subtraction for stability."""
    a = as_tensor(a)
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _op(out, (a,), backward)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    m = a.value.max(axis=axis, keepdims=True)
    shifted = a.value - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    soft = np.exp(out)

    def backward(g):
        return (g - soft * g.sum(axis=axis, keepdims=True),)

    return _op(out, (a,), backward)


def smooth_l1_elem(diff, beta: float) -> Tensor:
    """Elementwise Huber-style penalty of a difference tensor."""
    diff = as_tensor(diff)
    x = diff.value
    absx = np.abs(x)
    out = np.where(absx < beta, 0.5 * x ** 2 / beta, absx - 0.5 * beta)

    def backward(g):
        return (g * np.clip(x / beta, -1.0, 1.0),)

    return _op(out, (diff,), backward)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.value.mean(axis=-1, keepdims=True)
    centered = x.value - mu
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = xhat * gain.value + bias.value

    def backward(g):
        gx = None
        if x.requires_grad:
            dxhat = g * gain.value
            gx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        ggain = (_unbroadcast(g * xhat, gain.value.shape)
                 if gain.requires_grad else None)
        gbias = (_unbroadcast(g, bias.value.shape)
                 if bias.requires_grad else None)
        return (gx, ggain, gbias)

    return _op(out, (x, gain, bias), backward)


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` for everything reachable from a scalar loss."""
    if loss.value.size != 1:
        raise GraphError(f"backward requires a scalar loss, got shape "
                         f"{loss.value.shape}")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited and p.requires_grad:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.value)
    for node in reversed(topo):
        if node._backward is None or node.grad is None:
            continue
        grads = node._backward(node.grad)
        for p, g in zip(node._parents, grads):
            if g is None or not p.requires_grad:
                continue
            # no in-place accumulation: g may alias forward buffers
            p.grad = g if p.grad is None else p.grad + g


def zero_grads(params) -> None:
    for p in params:
        p.grad = None


def grad_check(f: Callable[[], Tensor], params: Sequence[Parameter],
               step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` must be a scalar function of the current values of ``params``;
    relative error per coordinate is |a - n| / max(1, |a|, |n|).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    zero_grads(params)
    out = f()
    if not np.isfinite(out.value).all():
        raise ValueError("non-finite function value at theta")
    backward(out)
    analytic = [np.zeros_like(p.value) if p.grad is None else p.grad.copy()
                for p in params]

    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.value.reshape(-1)
        aflat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = float(f().value)
            flat[i] = orig - step
            lo = float(f().value)
            flat[i] = orig
            num = (hi - lo) / (2.0 * step)
            err = abs(aflat[i] - num) / max(1.0, abs(aflat[i]), abs(num))
            worst = max(worst, err)
    return worst
