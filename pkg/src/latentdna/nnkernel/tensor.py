"""Reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` wraps an ``ndarray`` and, while gradient tracking is on,
remembers the tensors it was computed from together with a closure that
pushes the output gradient back to them. :meth:`Tensor.backward` walks the
recorded graph in reverse topological order.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


class NonFiniteError(FloatingPointError):
    """Raised when a forward or backward pass produces NaN or Inf."""


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _accumulate(t: "Tensor", g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if g.dtype != t.data.dtype:
        g = g.astype(t.data.dtype)
    t.grad = g if t.grad is None else t.grad + g


class Tensor:
    """N-dimensional array with an optional gradient."""

    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # -- construction helpers -------------------------------------------
    @staticmethod
    def _result(data: np.ndarray, parents: Sequence["Tensor"], backward) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.requires_grad = False
        out._parents = ()
        out._backward = None
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def _lift(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    # -- basic attributes -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # -- autodiff driver --------------------------------------------------
    def backward(self, grad=None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``.

        Intermediate nodes release their graph references afterwards, so a
        graph can be walked only once.
        """
        if grad is None:
            if self.data.size != 1:
                raise DimensionError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=self.data.dtype)
        if grad.shape != self.shape:
            raise DimensionError(f"seed gradient shape {grad.shape} != tensor shape {self.shape}")

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
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        _accumulate(self, grad)
        for node in reversed(order):
            if node._backward is None:
                continue
            if node.grad is not None:
                node._backward(node.grad)
            node.grad = None
            node._parents = ()
            node._backward = None

    def zero_grad(self) -> None:
        self.grad = None

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        other = self._lift(other)
        a, b = self, other

        def backward(g):
            _accumulate(a, _unbroadcast(g, a.shape))
            _accumulate(b, _unbroadcast(g, b.shape))

        return Tensor._result(a.data + b.data, (a, b), backward)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        a, b = self, other

        def backward(g):
            _accumulate(a, _unbroadcast(g, a.shape))
            _accumulate(b, _unbroadcast(-g, b.shape))

        return Tensor._result(a.data - b.data, (a, b), backward)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                _accumulate(a, _unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                _accumulate(b, _unbroadcast(g * a.data, b.shape))

        return Tensor._result(a.data * b.data, (a, b), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                _accumulate(a, _unbroadcast(g / b.data, a.shape))
            if b.requires_grad:
                _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

        return Tensor._result(a.data / b.data, (a, b), backward)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __neg__(self):
        a = self
        return Tensor._result(-a.data, (a,), lambda g: _accumulate(a, -g))

    def __pow__(self, exponent: float):
        if isinstance(exponent, Tensor):
            raise TypeError("only constant exponents are supported")
        a = self
        p = float(exponent)

        def backward(g):
            _accumulate(a, g * p * a.data ** (p - 1))

        return Tensor._result(a.data ** p, (a,), backward)

    def __matmul__(self, other):
        other = self._lift(other)
        a, b = self, other
        if a.ndim < 2 or b.ndim < 2:
            raise DimensionError("matmul operands need at least 2 dimensions")
        if a.shape[-1] != b.shape[-2]:
            raise DimensionError(
                f"matmul contraction axis mismatch: {a.shape[-1]} vs {b.shape[-2]}"
            )

        def backward(g):
            if a.requires_grad:
                _accumulate(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
            if b.requires_grad:
                _accumulate(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

        return Tensor._result(a.data @ b.data, (a, b), backward)

    def __rmatmul__(self, other):
        return self._lift(other) @ self

    # -- elementwise functions -------------------------------------------
    def exp(self):
        a = self
        out = np.exp(a.data)
        return Tensor._result(out, (a,), lambda g: _accumulate(a, g * out))

    def log(self):
        a = self
        return Tensor._result(np.log(a.data), (a,), lambda g: _accumulate(a, g / a.data))

    def sqrt(self):
        a = self
        out = np.sqrt(a.data)
        return Tensor._result(out, (a,), lambda g: _accumulate(a, g * 0.5 / out))

    def tanh(self):
        a = self
        out = np.tanh(a.data)
        return Tensor._result(out, (a,), lambda g: _accumulate(a, g * (1 - out * out)))

    def clamp(self, lo: float, hi: float):
        """Clip to ``[lo, hi]``; the gradient is zero where clipping is active."""
        a = self
        mask = (a.data >= lo) & (a.data <= hi)
        return Tensor._result(np.clip(a.data, lo, hi), (a,), lambda g: _accumulate(a, g * mask))

    # -- reductions and shape ops ----------------------------------------
    def sum(self, axis=None, keepdims: bool = False):
        a = self

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            _accumulate(a, np.broadcast_to(g, a.shape).copy())

        return Tensor._result(np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), backward)

    def mean(self, axis=None, keepdims: bool = False):
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
        return Tensor._result(a.data.reshape(shape), (a,), lambda g: _accumulate(a, g.reshape(a.shape)))

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inv = np.argsort(axes)
        a = self
        return Tensor._result(a.data.transpose(axes), (a,), lambda g: _accumulate(a, g.transpose(inv)))

    @property
    def T(self):
        return self.transpose()

    def __getitem__(self, idx):
        a = self
        if isinstance(idx, Tensor):
            idx = idx.data

        basic = all(
            isinstance(i, (slice, int, type(None), type(Ellipsis)))
            for i in (idx if isinstance(idx, tuple) else (idx,))
        )

        def backward(g):
            full = np.zeros_like(a.data)
            if basic:
                full[idx] = g
            else:
                np.add.at(full, idx, g)
            _accumulate(a, full)

        return Tensor._result(np.array(a.data[idx]), (a,), backward)


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            _accumulate(t, piece)

    return Tensor._result(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def split(x: Tensor, sections: int, axis: int = 0) -> list[Tensor]:
    """Split into ``sections`` equal pieces along ``axis``."""
    n = x.shape[axis]
    if n % sections:
        raise DimensionError(f"axis {axis} of size {n} not divisible into {sections} pieces")
    step = n // sections
    out = []
    for i in range(sections):
        idx = [slice(None)] * x.ndim
        idx[axis] = slice(i * step, (i + 1) * step)
        out.append(x[tuple(idx)])
    return out


def check_finite(*arrays, where: str = "") -> None:
    for a in arrays:
        data = a.data if isinstance(a, Tensor) else a
        if not np.all(np.isfinite(data)):
            raise NonFiniteError(f"non-finite values encountered{' in ' + where if where else ''}")
