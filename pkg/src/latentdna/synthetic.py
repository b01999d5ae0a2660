"""Synthetic corpora and latent fixtures with known structure."""
from __future__ import annotations

import numpy as np

from .seqcodec import NucleotideSequence

_BASES = np.frombuffer(b"ACGT", dtype=np.uint8)


def random_sequences(count: int, length: int, rng: np.random.Generator) -> list[NucleotideSequence]:
    """Uniform i.i.d. bases."""
    codes = rng.integers(0, 4, size=(count, length))
    return [NucleotideSequence(_BASES[row].tobytes().decode("ascii")) for row in codes]


def planted_motif_corpus(count: int, length: int = 256, motif: str = "TATAAA", center: int | None = None,
                         jitter: int = 10, fraction: float = 0.8, seed: int = 0) -> list[NucleotideSequence]:
    """Random background with ``motif`` planted in a ``fraction`` of sequences.

    The motif start is drawn uniformly from ``center +/- jitter`` (``center``
    defaults to ``length // 2``, the TSS position).
    """
    rng = np.random.default_rng(seed)
    center = length // 2 if center is None else center
    codes = rng.integers(0, 4, size=(count, length))
    chars = _BASES[codes]
    motif_bytes = np.frombuffer(motif.encode("ascii"), dtype=np.uint8)
    planted = rng.random(count) < fraction
    starts = rng.integers(center - jitter, center + jitter + 1, size=count)
    for i in np.flatnonzero(planted):
        chars[i, starts[i] : starts[i] + len(motif)] = motif_bytes
    return [NucleotideSequence(row.tobytes().decode("ascii")) for row in chars]


def two_mode_latents(count: int, shape=(2, 4, 4), centers=((-2.0, 1.0), (2.0, -1.0)), noise: float = 0.3,
                     seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Latents whose per-channel spatial mean is a 2-D two-component mixture.

    Channel ``c`` of a sample from mode ``k`` is ``centers[k][c]`` plus i.i.d.
    Gaussian noise. Returns ``(latents, mode_labels)``.
    """
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    labels = rng.integers(0, len(centers), size=count)
    z = centers[labels][:, :, None, None] + noise * rng.standard_normal((count, *shape))
    return z.astype(np.float32), labels
