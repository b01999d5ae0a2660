"""Ancestral DDPM sampling and per-channel latent standardisation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .schedule import NoiseSchedule


class SamplingError(FloatingPointError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True, eq=False)
class LatentStats:
    """Per-channel mean and standard deviation of (N, C, ...) latents."""

    mean: np.ndarray
    std: np.ndarray
    count: int

    def __post_init__(self):
        if np.any(~(np.asarray(self.std) > 0)):
            raise ValueError("latent std must be positive in every channel")

    @classmethod
    def fit(cls, latents: np.ndarray) -> "LatentStats":
        latents = np.asarray(latents, dtype=np.float64)
        if len(latents) == 0:
            raise ValueError("cannot fit latent statistics on an empty set")
        axes = (0,) + tuple(range(2, latents.ndim))
        mean = latents.mean(axis=axes)
        std = latents.std(axis=axes)
        # constant channels would divide by zero; leave them unscaled
        std = np.where(std > 1e-12, std, 1.0)
        return cls(mean, std, len(latents))

    @classmethod
    def identity(cls, channels: int) -> "LatentStats":
        return cls(np.zeros(channels), np.ones(channels), 0)

    def _shape(self, ndim: int) -> tuple[int, ...]:
        return (1, len(self.mean)) + (1,) * (ndim - 2)

    def standardize(self, latents: np.ndarray) -> np.ndarray:
        latents = np.asarray(latents)
        s = self._shape(latents.ndim)
        return ((latents - self.mean.reshape(s)) / self.std.reshape(s)).astype(np.float32)

    def destandardize(self, latents: np.ndarray) -> np.ndarray:
        latents = np.asarray(latents)
        s = self._shape(latents.ndim)
        return (latents * self.std.reshape(s) + self.mean.reshape(s)).astype(np.float32)

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {"latent_stats.mean": np.asarray(self.mean, np.float64),
                "latent_stats.std": np.asarray(self.std, np.float64),
                "latent_stats.count": np.asarray(self.count, np.float64)}

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> "LatentStats":
        return cls(np.asarray(arrays["latent_stats.mean"], np.float64),
                   np.asarray(arrays["latent_stats.std"], np.float64),
                   int(arrays["latent_stats.count"]))


def ddpm_sample(eps_model: Callable[[np.ndarray, np.ndarray], np.ndarray], schedule: NoiseSchedule,
                count: int, seed, stats: LatentStats | None = None, shape=None,
                variance: str = "large", batch_size: int | None = None) -> list[np.ndarray]:
    """Draw ``count`` latents by running the reverse chain from z_T ~ N(0, I).

    ``eps_model(z, t)`` maps a batch and a per-sample step array to a noise
    estimate. ``variance`` picks sigma_t^2 = beta_t ("large") or the posterior
    variance ("small"). No noise is added on the final step. Samples are
    de-standardised with ``stats`` when given.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return []
    if shape is None:
        shape = getattr(eps_model, "sample_shape", None)
        if shape is None:
            raise ValueError("sample shape unknown; pass shape=")
    shape = tuple(shape)
    if variance == "large":
        sigmas = np.sqrt(schedule.betas)
    elif variance == "small":
        sigmas = np.sqrt(schedule.posterior_variance())
    else:
        raise ValueError("variance must be 'large' or 'small'")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    batch_size = count if batch_size is None else batch_size

    out = []
    for start in range(0, count, batch_size):
        n = min(batch_size, count - start)
        z = rng.standard_normal((n, *shape))
        for t in range(schedule.T, 0, -1):
            eps = np.asarray(eps_model(z, np.full(n, t)), dtype=np.float64)
            a, ab, beta = schedule.alphas[t - 1], schedule.alpha_bars[t - 1], schedule.betas[t - 1]
            z = (z - beta / np.sqrt(1.0 - ab) * eps) / np.sqrt(a)
            if t > 1:
                z = z + sigmas[t - 1] * rng.standard_normal(z.shape)
            if not np.all(np.isfinite(z)):
                raise SamplingError(f"non-finite latent at reverse step {t}", t)
        if stats is not None:
            z = stats.destandardize(z)
        out.extend(np.asarray(z, dtype=np.float32))
    return out
