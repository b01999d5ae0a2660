"""Central finite-difference checks for analytic gradients."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_grad(fn: Callable[[], Tensor], wrt: Tensor, h: float = 1e-5) -> np.ndarray:
    """d sum(fn() * probe) / d wrt by central differences.

    ``fn`` must be a closure re-evaluating the forward pass from the current
    ``wrt.data``.
    """
    grad = np.zeros_like(wrt.data)
    flat = wrt.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        plus = float(np.sum(fn().data))
        flat[i] = orig - h
        minus = float(np.sum(fn().data))
        flat[i] = orig
        gflat[i] = (plus - minus) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-8)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def gradcheck(fn: Callable[..., Tensor], inputs: Sequence[Tensor], rng: np.random.Generator | None = None,
              h: float = 1e-5) -> float:
    """Worst relative error between backprop and finite differences.

    The scalar checked is ``sum(fn(*inputs) * probe)`` for a fixed random
    ``probe``, which exercises every output element. Inputs should be
    float64 tensors with ``requires_grad=True``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    out = fn(*inputs)
    probe = rng.standard_normal(out.shape)

    def scalar():
        return Tensor((fn(*inputs).data * probe).sum(), dtype=np.float64)

    for t in inputs:
        t.grad = None
    out.backward(probe.astype(out.dtype))
    worst = 0.0
    for t in inputs:
        if not t.requires_grad:
            continue
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = numerical_grad(scalar, t, h)
        worst = max(worst, relative_error(analytic, numeric))
    return worst
