"""Reverse-mode automatic differentiation over numpy arrays.

A small tape-based engine: every operation returns a Tensor holding the
forward result plus a closure that routes the output gradient back to
the operation's inputs. Calling backward() on a scalar loss walks the
tape in reverse topological order and accumulates gradients into every
reachable Tensor with requires_grad set.

Everything is float64. Integer index arrays (token ids, gather indices)
are plain numpy arrays, never Tensors. Wrapping scoring code in no_grad()
skips tape construction entirely.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np
from scipy.special import erf

# Tape construction is toggled per thread so concurrent no_grad scoring
# (e.g. server request handlers) cannot disturb a training thread.
_STATE = threading.local()


def _grad_enabled() -> bool:
    return getattr(_STATE, "grad_enabled", True)


@contextmanager
def no_grad():
    """Disable tape construction inside the block (inference fast path)."""
    previous = _grad_enabled()
    _STATE.grad_enabled = False
    try:
        yield
    finally:
        _STATE.grad_enabled = previous


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into .grad for every reachable leaf."""
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen and parent.requires_grad:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    if not tensor.requires_grad:
        return
    if tensor.grad is None:
        tensor.grad = np.zeros_like(tensor.data)
    tensor.grad += grad


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, size in enumerate(shape)
                 if size == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


# -- arithmetic ---------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def backward(grad):
        _accumulate(a, _unbroadcast(grad, a.data.shape))
        _accumulate(b, _unbroadcast(grad, b.data.shape))

    return _node(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def backward(grad):
        _accumulate(a, _unbroadcast(grad * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(grad * a.data, b.data.shape))

    return _node(data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data / b.data

    def backward(grad):
        _accumulate(a, _unbroadcast(grad / b.data, a.data.shape))
        _accumulate(b, _unbroadcast(-grad * a.data / (b.data * b.data),
                                    b.data.shape))

    return _node(data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data @ b.data

    def backward(grad):
        if a.requires_grad:
            ga = grad @ np.swapaxes(b.data, -1, -2)
            _accumulate(a, _unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ grad
            _accumulate(b, _unbroadcast(gb, b.data.shape))

    return _node(data, (a, b), backward)


# -- elementwise nonlinearities ------------------------------------------

def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def backward(grad):
        _accumulate(a, grad * (1.0 - data * data))

    return _node(data, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(grad):
        _accumulate(a, grad * data * (1.0 - data))

    return _node(data, (a,), backward)


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)

    def backward(grad):
        _accumulate(a, grad * (a.data > 0.0))

    return _node(data, (a,), backward)


def gelu(a: Tensor) -> Tensor:
    """Gaussian error linear unit, exact erf form."""
    cdf = 0.5 * (1.0 + erf(a.data / np.sqrt(2.0)))
    data = a.data * cdf

    def backward(grad):
        pdf = np.exp(-0.5 * a.data * a.data) / np.sqrt(2.0 * np.pi)
        _accumulate(a, grad * (cdf + a.data * pdf))

    return _node(data, (a,), backward)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def backward(grad):
        _accumulate(a, grad * data)

    return _node(data, (a,), backward)


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def backward(grad):
        _accumulate(a, grad / a.data)

    return _node(data, (a,), backward)


def sqrt(a: Tensor) -> Tensor:
    data = np.sqrt(a.data)

    def backward(grad):
        _accumulate(a, grad * 0.5 / data)

    return _node(data, (a,), backward)


# -- reductions and shape ------------------------------------------------

def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(grad):
        g = grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape).copy())

    return _node(data, (a,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a: Tensor, shape) -> Tensor:
    data = a.data.reshape(shape)

    def backward(grad):
        _accumulate(a, grad.reshape(a.data.shape))

    return _node(data, (a,), backward)


def transpose(a: Tensor, axes) -> Tensor:
    data = a.data.transpose(axes)
    inverse = np.argsort(axes)

    def backward(grad):
        _accumulate(a, grad.transpose(inverse))

    return _node(data, (a,), backward)


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(grad):
        pieces = np.split(grad, np.cumsum(sizes)[:-1], axis=axis)
        for tensor, piece in zip(tensors, pieces):
            _accumulate(tensor, piece)

    return _node(data, tuple(tensors), backward)


def getitem(a: Tensor, key) -> Tensor:
    data = a.data[key]

    def backward(grad):
        if not a.requires_grad:
            return
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        np.add.at(a.grad, key, grad)

    return _node(data, (a,), backward)


def index_rows(a: Tensor, indices: np.ndarray) -> Tensor:
    """Gather rows of a 2-D Tensor: out[..., :] = a[indices[...], :].

    This is the embedding-lookup primitive; the backward pass scatter-adds
    into the source rows.
    """
    data = a.data[indices]

    def backward(grad):
        if not a.requires_grad:
            return
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        np.add.at(a.grad, indices, grad)

    return _node(data, (a,), backward)


# -- softmax family -------------------------------------------------------

def log_softmax(a: Tensor, axis: int = -1,
                mask: np.ndarray | None = None) -> Tensor:
    """Log-probabilities along `axis`, optionally restricted by a 0/1 mask.

    Masked positions come out as -inf and carry no gradient; the
    distribution is normalized over the unmasked positions only.
    """
    logits = a.data
    if mask is not None:
        logits = np.where(mask.astype(bool), logits, -np.inf)
    peak = np.max(logits, axis=axis, keepdims=True)
    shifted = logits - peak
    lse = peak + np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    data = logits - lse
    probs = np.exp(data)

    def backward(grad):
        total = grad.sum(axis=axis, keepdims=True)
        _accumulate(a, grad - probs * total)

    return _node(data, (a,), backward)


def softmax(a: Tensor, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    return exp(log_softmax(a, axis=axis, mask=mask))


def clamp(a: Tensor, lo: float | None = None, hi: float | None = None) -> Tensor:
    """Clip values; gradient passes only through strictly interior entries."""
    data = np.clip(a.data, lo, hi)
    inside = np.ones(a.data.shape, dtype=bool)
    if lo is not None:
        inside &= a.data > lo
    if hi is not None:
        inside &= a.data < hi

    def backward(grad):
        _accumulate(a, grad * inside)

    return _node(data, (a,), backward)


# -- composite helpers -----------------------------------------------------

_DENOM_FLOOR = 1e-30


def cosine_similarity(a: Tensor, b: Tensor, axis: int = -1) -> Tensor:
    """Cosine of the angle between matching vectors along `axis`.

    Identical vectors score 1.0 to float rounding, a zero vector scores
    exactly 0, and the result is clipped into [-1, 1] so downstream
    rescaling cannot leave the unit interval.
    """
    dot = sum_(mul(a, b), axis=axis)
    prod = sqrt(mul(sum_(mul(a, a), axis=axis),
                    sum_(mul(b, b), axis=axis)))
    return clamp(div(dot, clamp(prod, lo=_DENOM_FLOOR)), lo=-1.0, hi=1.0)


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None,
            training: bool) -> Tensor:
    """Inverted dropout; identity when not training or rate is 0."""
    if not training or rate <= 0.0:
        return a
    if rng is None:
        raise ValueError("dropout during training needs an rng")
    keep = (rng.random(a.data.shape) >= rate) / (1.0 - rate)
    return mul(a, keep)


def l2_penalty(tensors: list[Tensor], coefficient: float) -> Tensor:
    """coefficient * sum of squared entries over the given tensors."""
    total = Tensor(0.0)
    for tensor in tensors:
        total = add(total, sum_(mul(tensor, tensor)))
    return mul(total, coefficient)


# -- optimization ----------------------------------------------------------

class Adam:
    """Adam optimizer over a fixed list of parameter Tensors."""

    def __init__(self, params: list[Tensor], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = [p for p in params if p.requires_grad]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        correction1 = 1.0 - b1 ** self.step_count
        correction2 = 1.0 - b2 ** self.step_count
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            m *= b1
            m += (1.0 - b1) * p.grad
            v *= b2
            v += (1.0 - b2) * (p.grad * p.grad)
            m_hat = m / correction1
            v_hat = v / correction2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def glorot(rng: np.random.Generator, rows: int, cols: int) -> Tensor:
    """Uniform Glorot-initialized trainable matrix."""
    limit = np.sqrt(6.0 / (rows + cols))
    return Tensor(rng.uniform(-limit, limit, size=(rows, cols)),
                  requires_grad=True)


def zeros(*shape: int) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)
