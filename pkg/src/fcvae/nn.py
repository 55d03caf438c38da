"""Reverse-mode automatic differentiation on dense float64 arrays.

Define-by-run tape in the micrograd style: every operation returns a new
Tensor that remembers its parents and a closure mapping the output
adjoint to parent adjoints. backward() walks the tape in reverse
topological order. Intermediate adjoints live in a scratch table for
the duration of one backward pass; only leaf tensors (parameters)
accumulate into .grad, so calling backward twice without zeroing adds
the same parameter gradients twice, and zero_grad + backward equals a
fresh backward.

Everything is float64. Inference code can wrap forward passes in
no_grad() to skip tape construction entirely; the arithmetic is
identical either way.
"""

from __future__ import annotations

import math
import threading
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import NumericError, ShapeError

LOG_2PI = math.log(2.0 * math.pi)

# per-thread so independent tapes can run in parallel
_state = threading.local()


def _grad_on() -> bool:
    return getattr(_state, "grad_enabled", True)


class no_grad:
    """Context manager that disables tape construction inside the block."""

    def __enter__(self):
        self._prev = _grad_on()
        _state.grad_enabled = False
        return self

    def __exit__(self, exc_type, exc, tb):
        _state.grad_enabled = self._prev
        return False


class Tensor:
    """A float64 ndarray plus optional tape bookkeeping."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], tuple] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # operator sugar; the module-level functions are the real ops
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

    def __pow__(self, p):
        return power(self, p)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    """Build an op result; attach tape info only if gradients can flow."""
    out = Tensor(data)
    if _grad_on() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _topo(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into .grad for every reachable leaf.

    loss must be scalar (size 1). Raises ShapeError otherwise.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return
    order = _topo(loss)
    adjoint: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = adjoint.pop(id(node), None)
        if g is None:
            continue
        if node._parents:
            pgrads = node._backward(g)
            for p, pg in zip(node._parents, pgrads):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                if key in adjoint:
                    adjoint[key] = adjoint[key] + pg
                else:
                    adjoint[key] = pg
        elif node.requires_grad:
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
            node.grad += g


# ---------------------------------------------------------------------------
# primitive ops


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    data = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    data = a.data - b.data

    def bw(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _make(data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    data = a.data * b.data

    def bw(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    return _make(data, (a, b), bw)


def neg(a) -> Tensor:
    a = _lift(a)

    def bw(g):
        return (-g,)

    return _make(-a.data, (a,), bw)


def power(a, p: float) -> Tensor:
    """Elementwise a**p for a constant scalar exponent."""
    a = _lift(a)
    p = float(p)
    data = a.data ** p

    def bw(g):
        return (g * p * a.data ** (p - 1.0),)

    return _make(data, (a,), bw)


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul shapes do not conform: {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def bw(g):
        return g @ b.data.T, a.data.T @ g

    return _make(data, (a, b), bw)


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = _lift(a)
    data = a.data.reshape(shape)

    def bw(g):
        return (g.reshape(a.data.shape),)

    return _make(data, (a,), bw)


def tsum(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape),)

    return _make(data, (a,), bw)


def tmean(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def concat(tensors: Sequence, axis: int = 1) -> Tensor:
    ts = tuple(_lift(t) for t in tensors)
    data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(data, ts, bw)


def gather_rows(a, idx: np.ndarray) -> Tensor:
    """Select rows of a 2-D tensor; backward scatter-adds into place."""
    a = _lift(a)
    if a.data.ndim != 2:
        raise ShapeError(f"gather_rows expects a 2-D tensor, got shape {a.data.shape}")
    idx = np.asarray(idx, dtype=np.int64)
    data = a.data[idx]

    def bw(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, g)
        return (buf,)

    return _make(data, (a,), bw)


def relu(a) -> Tensor:
    a = _lift(a)
    data = np.maximum(a.data, 0.0)

    def bw(g):
        return (g * (a.data > 0.0),)

    return _make(data, (a,), bw)


def tanh(a) -> Tensor:
    a = _lift(a)
    data = np.tanh(a.data)

    def bw(g):
        return (g * (1.0 - data * data),)

    return _make(data, (a,), bw)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def softplus(a) -> Tensor:
    """log(1 + exp(x)), linear for large x to avoid overflow."""
    a = _lift(a)
    x = a.data
    data = np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))

    def bw(g):
        return (g * _sigmoid(x),)

    return _make(data, (a,), bw)


def texp(a) -> Tensor:
    a = _lift(a)
    data = np.exp(a.data)

    def bw(g):
        return (g * data,)

    return _make(data, (a,), bw)


def tlog(a) -> Tensor:
    a = _lift(a)
    data = np.log(a.data)

    def bw(g):
        return (g / a.data,)

    return _make(data, (a,), bw)


def softmax(a) -> Tensor:
    """Row-wise softmax over the last axis, max-shifted for stability."""
    a = _lift(a)
    shift = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shift)
    data = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        dot = (g * data).sum(axis=-1, keepdims=True)
        return (data * (g - dot),)

    return _make(data, (a,), bw)


# ---------------------------------------------------------------------------
# composite ops


def dense_forward(x, weight, bias) -> Tensor:
    """x @ weight + bias with (in, out)-shaped weight and (out,) bias."""
    return add(matmul(x, weight), bias)


def dropout(a, p: float, training: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout. Identity when not training or p == 0."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return _lift(a)
    a = _lift(a)
    keep = (rng.random(a.data.shape) >= p).astype(np.float64) / (1.0 - p)
    return mul(a, Tensor(keep))


def gaussian_sample(mean, std, rng: np.random.Generator) -> Tensor:
    """Reparameterized draw mean + std * eps, eps ~ N(0, I)."""
    mean, std = _lift(mean), _lift(std)
    if np.any(std.data <= 0.0):
        raise NumericError("gaussian_sample requires strictly positive std")
    eps = rng.standard_normal(np.broadcast_shapes(mean.data.shape, std.data.shape))
    return add(mean, mul(std, Tensor(eps)))


def gaussian_log_prob(x, mean, std) -> Tensor:
    """Elementwise log N(x; mean, std^2), composed from primitives."""
    x, mean, std = _lift(x), _lift(mean), _lift(std)
    if np.any(std.data <= 0.0):
        raise NumericError("gaussian_log_prob requires strictly positive std")
    d = sub(x, mean)
    quad = mul(mul(mul(d, d), power(std, -2.0)), 0.5)
    return sub(sub(Tensor(-0.5 * LOG_2PI), tlog(std)), quad)


# ---------------------------------------------------------------------------
# parameters and optimizer


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class ParameterStore:
    """Named leaf tensors with deterministic (sorted-name) iteration."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        for name in self.names():
            yield name, self._params[name]

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def n_parameters(self) -> int:
        return sum(p.data.size for p in self._params.values())


class Adam:
    """Adam with bias correction; state persists across steps."""

    def __init__(self, params: ParameterStore, lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0.0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, p in self.params.items():
            if p.grad is None:
                raise ValueError(f"parameter {name!r} has no gradient; run backward first")
            g = p.grad
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * g * g
            mhat = self.m[name] / (1.0 - b1 ** self.t)
            vhat = self.v[name] / (1.0 - b2 ** self.t)
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self) -> None:
        self.params.zero_grad()
