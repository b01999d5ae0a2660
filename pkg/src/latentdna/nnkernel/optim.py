from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .layers import Parameter


class Adam:
    """Bias-corrected Adam. Moment state lives on each :class:`Parameter`."""

    def __init__(self, params: Iterable[Parameter], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def step(self, lr: float | None = None, zero_grad: bool = False) -> None:
        lr = self.lr if lr is None else lr
        b1, b2 = self.beta1, self.beta2
        for p in self.params:
            p.step += 1
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            p.m *= b1
            p.m += (1 - b1) * g
            p.v *= b2
            p.v += (1 - b2) * g * g
            m_hat = p.m / (1 - b1 ** p.step)
            v_hat = p.v / (1 - b2 ** p.step)
            p.data = p.data - (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype)
            if zero_grad:
                p.grad = None

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def adam_step(params: Iterable[Parameter], lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, zero_grad: bool = False) -> None:
    """One functional Adam update over ``params``."""
    Adam(params, lr, beta1, beta2, eps).step(zero_grad=zero_grad)


def cosine_warmup_lr(base_lr: float, progress: float, total: float, warmup: float) -> float:
    """Learning rate after ``progress`` epochs (fractional allowed).

    Linear ramp from 0 over ``warmup`` epochs, then a single cosine decay
    reaching zero at ``total``.
    """
    if warmup > 0 and progress < warmup:
        return base_lr * progress / warmup
    span = max(total - warmup, 1e-12)
    frac = min(max((progress - warmup) / span, 0.0), 1.0)
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * frac))
