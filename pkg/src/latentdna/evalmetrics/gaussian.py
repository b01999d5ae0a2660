"""Gaussian summaries and the Frechet distance between them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PSD_TOLERANCE = 1e-6
SYMMETRY_TOLERANCE = 1e-8


class NotPSDError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GaussianSummary:
    mean: np.ndarray
    covariance: np.ndarray
    count: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=np.float64))
        if mean.ndim != 1 or cov.shape != (len(mean), len(mean)):
            raise ValueError(f"mean {mean.shape} and covariance {cov.shape} are inconsistent")
        if not np.allclose(cov, cov.T, rtol=0, atol=SYMMETRY_TOLERANCE * max(1.0, np.abs(cov).max(initial=0))):
            raise ValueError("covariance is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return len(self.mean)


def fit_gaussian(embeddings) -> GaussianSummary:
    """Sample mean and unbiased covariance of an N x d matrix (N >= 2)."""
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"embeddings must be a 2-D matrix, got shape {x.shape}")
    n = len(x)
    if n < 2:
        raise ValueError(f"need at least 2 embeddings to fit a covariance, got {n}")
    mean = x.mean(axis=0)
    centred = x - mean
    cov = centred.T @ centred / (n - 1)
    return GaussianSummary(mean, (cov + cov.T) / 2, n)


def matrix_sqrt_psd(m) -> np.ndarray:
    """Symmetric square root via eigendecomposition.

    Eigenvalues in [-1e-6, 0) are treated as zero; anything more negative
    raises :class:`NotPSDError`.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got {m.shape}")
    if not np.allclose(m, m.T, rtol=0, atol=SYMMETRY_TOLERANCE * max(1.0, np.abs(m).max(initial=0))):
        raise ValueError("matrix is not symmetric")
    w, v = np.linalg.eigh((m + m.T) / 2)
    if w.size and w.min() < -PSD_TOLERANCE:
        raise NotPSDError(f"matrix has eigenvalue {w.min():.3g} below -{PSD_TOLERANCE}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


def _trace_sqrt_psd(m: np.ndarray) -> float:
    w = np.linalg.eigvalsh((m + m.T) / 2)
    if w.size and w.min() < -PSD_TOLERANCE * max(1.0, abs(w).max()):
        raise NotPSDError(f"matrix has eigenvalue {w.min():.3g} below tolerance")
    return float(np.sqrt(np.clip(w, 0.0, None)).sum())


def frechet_distance(a: GaussianSummary, b: GaussianSummary) -> float:
    """``|mu_a - mu_b|^2 + tr(S_a) + tr(S_b) - 2 tr sqrt(S_a^1/2 S_b S_a^1/2)``, floored at 0."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if np.array_equal(a.mean, b.mean) and np.array_equal(a.covariance, b.covariance):
        return 0.0
    diff = a.mean - b.mean
    root_a = matrix_sqrt_psd(a.covariance)
    cross = _trace_sqrt_psd(root_a @ b.covariance @ root_a)
    d = float(diff @ diff + np.trace(a.covariance) + np.trace(b.covariance) - 2.0 * cross)
    return max(d, 0.0)
