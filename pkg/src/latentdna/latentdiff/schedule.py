"""Variance-preserving noise schedules and the closed-form forward kernel.

Steps are 1-based: ``t`` runs over 1..T and ``betas[t - 1]`` is beta_t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    betas: np.ndarray
    kind: str = "linear"

    def __post_init__(self):
        betas = np.array(self.betas, dtype=np.float64)
        if betas.ndim != 1 or len(betas) == 0:
            raise ValueError("betas must be a non-empty 1-D sequence")
        if not np.all((betas > 0) & (betas < 1)):
            raise ValueError("every beta must lie strictly between 0 and 1")
        betas.setflags(write=False)
        object.__setattr__(self, "betas", betas)
        alphas = 1.0 - betas
        alpha_bars = np.cumprod(alphas)
        alphas.setflags(write=False)
        alpha_bars.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha_bars", alpha_bars)

    @property
    def T(self) -> int:
        return len(self.betas)

    def _index(self, t) -> np.ndarray:
        t = np.asarray(t)
        if np.any(t < 1) or np.any(t > self.T):
            raise ValueError(f"step must lie in 1..{self.T}")
        return t.astype(np.int64) - 1

    def alpha_bar(self, t) -> np.ndarray:
        return self.alpha_bars[self._index(t)]

    def posterior_variance(self) -> np.ndarray:
        """beta-tilde_t = (1 - abar_{t-1}) / (1 - abar_t) * beta_t, with abar_0 = 1."""
        prev = np.concatenate([[1.0], self.alpha_bars[:-1]])
        return (1.0 - prev) / (1.0 - self.alpha_bars) * self.betas

    def to_dict(self) -> dict:
        return {"T": self.T, "kind": self.kind}


def build_schedule(T: int = 1000, kind: str = "linear", beta_start: float = 1e-4,
                   beta_end: float = 0.02, cosine_offset: float = 0.008) -> NoiseSchedule:
    """Linear betas from ``beta_start`` to ``beta_end``, or the cosine alpha-bar schedule."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if kind == "linear":
        betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    elif kind == "cosine":
        s = np.arange(T + 1, dtype=np.float64) / T
        f = np.cos((s + cosine_offset) / (1 + cosine_offset) * math.pi / 2) ** 2
        betas = np.clip(1.0 - f[1:] / f[:-1], 1e-8, 0.999)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    return NoiseSchedule(betas, kind)


def _per_sample(values: np.ndarray, ndim: int) -> np.ndarray:
    return values.reshape(values.shape + (1,) * (ndim - values.ndim))


def forward_diffuse(z0, t, eps, schedule: NoiseSchedule) -> np.ndarray:
    """``sqrt(abar_t) z0 + sqrt(1 - abar_t) eps``.

    ``t`` is a scalar step or one step per leading-axis sample.
    """
    z0 = np.asarray(z0)
    eps = np.asarray(eps)
    if z0.shape != eps.shape:
        raise ValueError(f"z0 {z0.shape} and eps {eps.shape} differ in shape")
    ab = _per_sample(np.asarray(schedule.alpha_bar(t)), z0.ndim)
    return (np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps).astype(np.result_type(z0, eps), copy=False)


def forward_step(z_prev, t, eps, schedule: NoiseSchedule) -> np.ndarray:
    """One transition ``z_t = sqrt(1 - beta_t) z_{t-1} + sqrt(beta_t) eps``."""
    z_prev = np.asarray(z_prev)
    beta = _per_sample(np.asarray(schedule.betas[schedule._index(t)]), z_prev.ndim)
    return np.sqrt(1.0 - beta) * z_prev + np.sqrt(beta) * np.asarray(eps)


def score_from_noise(eps_estimate, t, schedule: NoiseSchedule) -> np.ndarray:
    """Score estimate ``-eps / sqrt(1 - abar_t)`` implied by a noise prediction."""
    eps_estimate = np.asarray(eps_estimate)
    ab = _per_sample(np.asarray(schedule.alpha_bar(t)), eps_estimate.ndim)
    return -eps_estimate / np.sqrt(1.0 - ab)
