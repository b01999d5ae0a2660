"""Frechet distance on reference-encoder embeddings of DNA sequences."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..seqcodec import one_hot_batch
from .gaussian import fit_gaussian, frechet_distance

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FredResult:
    value: float
    count_a: int
    count_b: int
    dim: int
    warnings: tuple[str, ...] = ()

    def __float__(self) -> float:
        return self.value


def embed(encoder, seqs: Sequence[str], batch_size: int = 256) -> np.ndarray:
    """Flattened posterior means, one row per sequence."""
    length = encoder.cfg.sequence_length
    for i, s in enumerate(seqs):
        if len(s) != length:
            raise ValueError(f"sequence {i} has length {len(s)}; the reference encoder expects {length}")
    if len(seqs) == 0:
        return np.zeros((0, int(np.prod(encoder.cfg.latent_shape))))
    means = encoder.encode_means(one_hot_batch(list(seqs)), batch_size)
    return means.reshape(len(seqs), -1).astype(np.float64)


def fred(real_seqs: Sequence[str], generated_seqs: Sequence[str], encoder, batch_size: int = 256) -> FredResult:
    """FReD between two sequence sets under a pre-trained reference encoder."""
    if len(real_seqs) == 0 or len(generated_seqs) == 0:
        raise ValueError("both sequence sets must be non-empty")
    a = embed(encoder, real_seqs, batch_size)
    b = embed(encoder, generated_seqs, batch_size)
    d = a.shape[1]
    warnings = []
    for name, m in (("set A", a), ("set B", b)):
        if len(m) < d + 1:
            warnings.append(f"{name} has {len(m)} sequences for a {d}-dimensional embedding; "
                            "the covariance is rank-deficient")
    for w in warnings:
        log.warning("fred: %s", w)
    return FredResult(frechet_distance(fit_gaussian(a), fit_gaussian(b)), len(a), len(b), d, tuple(warnings))
