"""Chromatin-profile hit counting and embedding distance on exported predictions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gaussian import fit_gaussian, frechet_distance
from .matrixio import load_matrix

HIT_THRESHOLD = 0.9


class PredictionRangeError(ValueError):
    def __init__(self, message: str, row: int, col: int):
        super().__init__(message)
        self.row = row
        self.col = col


@dataclass(frozen=True)
class ProfileHitReport:
    counts: dict[str, int]
    threshold: float
    sequences: int
    ranking: list[tuple[str, int]] = field(default_factory=list)

    def top(self, k: int = 10) -> list[tuple[str, int]]:
        return self.ranking[:k]


def _as_matrix(m) -> np.ndarray:
    if isinstance(m, np.ndarray):
        return m
    if isinstance(m, (list, tuple)):
        return np.asarray(m, dtype=np.float64)
    return load_matrix(m)


def read_labels(path) -> list[str]:
    """One profile label per line; blank lines are ignored."""
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def sei_hits(predictions, threshold: float = HIT_THRESHOLD, labels=None) -> ProfileHitReport:
    """Per-profile count of sequences whose prediction strictly exceeds ``threshold``.

    ``predictions`` is an N x P matrix (array or matrix file) with entries in
    [0, 1]. The ranking sorts by count descending, ties by column order.
    """
    m = np.atleast_2d(np.asarray(_as_matrix(predictions), dtype=np.float64))
    if m.size == 0:
        m = m.reshape(0, len(labels) if labels is not None else 0)
    bad = np.argwhere(~((m >= 0) & (m <= 1)))
    if len(bad):
        r, c = (int(v) for v in bad[0])
        raise PredictionRangeError(f"prediction at row {r}, column {c} is {m[r, c]!r}, outside [0, 1]", r, c)
    n, p = m.shape
    if labels is None:
        labels = [f"profile_{j}" for j in range(p)]
    labels = [str(x) for x in labels]
    if len(labels) != p:
        raise ValueError(f"{len(labels)} labels for {p} profile columns")
    if len(set(labels)) != p:
        raise ValueError("profile labels must be unique")
    hits = (m > threshold).sum(axis=0)
    counts = {lab: int(h) for lab, h in zip(labels, hits)}
    order = sorted(range(p), key=lambda j: (-hits[j], j))
    return ProfileHitReport(counts, threshold, n, [(labels[j], int(hits[j])) for j in order])


def sei_embedding_distance(embeddings_a, embeddings_b) -> float:
    """Frechet distance between Gaussians fitted to two exported embedding matrices."""
    a = np.asarray(_as_matrix(embeddings_a), dtype=np.float64)
    b = np.asarray(_as_matrix(embeddings_b), dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"embedding matrices must share a column count, got {a.shape} and {b.shape}")
    return frechet_distance(fit_gaussian(a), fit_gaussian(b))
