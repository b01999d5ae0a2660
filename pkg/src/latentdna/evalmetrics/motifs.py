"""Motif scanning and TSS-relative positional histograms."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable

import numpy as np

TATA_BOX = "TATAWAW"
_CLASSES = {"A": "A", "C": "C", "G": "G", "T": "T", "W": "[AT]"}


def _compile(pattern: str) -> re.Pattern:
    pattern = pattern.upper()
    if not pattern:
        raise ValueError("empty motif pattern")
    bad = [ch for ch in pattern if ch not in _CLASSES]
    if bad:
        raise ValueError(f"motif pattern may use A, C, G, T and W only; got {bad[0]!r}")
    # zero-width lookahead so overlapping hits are all reported
    return re.compile("(?=" + "".join(_CLASSES[ch] for ch in pattern) + ")")


def motif_scan(seq: str, pattern: str) -> list[int]:
    """0-based start of every (possibly overlapping) match; ``W`` matches A or T."""
    return [m.start() for m in _compile(pattern).finditer(str(seq).upper())]


@dataclass(frozen=True, eq=False)
class MotifHistogram:
    """Motif start counts binned by offset from the TSS.

    Bin ``k`` is centred on ``k * bin_width`` and covers
    ``[centre - bin_width/2, centre + bin_width/2)``.
    """

    pattern: str
    centers: np.ndarray
    counts: np.ndarray
    bin_width: int
    sequences: int
    tss: int

    @property
    def edges(self) -> np.ndarray:
        return np.append(self.centers - self.bin_width / 2, self.centers[-1] + self.bin_width / 2) \
            if len(self.centers) else np.zeros(0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def normalized(self) -> np.ndarray:
        t = self.counts.sum()
        return self.counts / t if t else np.zeros(len(self.counts))

    def modal_center(self) -> int | None:
        return int(self.centers[int(np.argmax(self.counts))]) if self.total else None

    def smoothed(self, window: int) -> np.ndarray:
        return moving_average(self.counts, window)


def _bin_index(offset, width: int):
    return np.floor((np.asarray(offset) + width / 2) / width).astype(np.int64)


def motif_histogram(corpus: Iterable[str], pattern: str = TATA_BOX, bin_width: int = 10,
                    tss: int | None = None, length: int | None = None) -> MotifHistogram:
    """Histogram of motif starts relative to ``tss`` (default: half the sequence length).

    The bin range spans every offset a sequence of ``length`` can produce, so
    histograms of equal-length corpora share bins.
    """
    if bin_width < 1:
        raise ValueError("bin_width must be >= 1")
    seqs = list(corpus)
    if length is None:
        length = len(seqs[0]) if seqs else 2048
    if tss is None:
        tss = length // 2
    lo, hi = _bin_index(-tss, bin_width), _bin_index(length - 1 - tss, bin_width)
    centers = np.arange(lo, hi + 1) * bin_width
    counts = np.zeros(len(centers), dtype=np.int64)
    rx = _compile(pattern)
    for s in seqs:
        starts = [m.start() for m in rx.finditer(str(s).upper())]
        if starts:
            idx = _bin_index(np.array(starts) - tss, bin_width) - lo
            idx = idx[(idx >= 0) & (idx < len(counts))]
            np.add.at(counts, idx, 1)
    return MotifHistogram(pattern.upper(), centers, counts, bin_width, len(seqs), tss)


def histogram_distance(h1, h2) -> float:
    """Total variation distance ``0.5 * sum |p - q|`` between normalised histograms.

    Accepts :class:`MotifHistogram` (aligned on bin centres) or raw count
    arrays of equal length. An empty histogram is at distance 1 from a
    non-empty one and 0 from another empty one.
    """
    if isinstance(h1, MotifHistogram) and isinstance(h2, MotifHistogram):
        if h1.bin_width != h2.bin_width:
            raise ValueError("histograms use different bin widths")
        centers = np.union1d(h1.centers, h2.centers)
        p = np.zeros(len(centers))
        q = np.zeros(len(centers))
        p[np.searchsorted(centers, h1.centers)] = h1.counts
        q[np.searchsorted(centers, h2.centers)] = h2.counts
    else:
        p = np.asarray(h1, dtype=np.float64)
        q = np.asarray(h2, dtype=np.float64)
        if p.shape != q.shape:
            raise ValueError(f"histogram shapes differ: {p.shape} vs {q.shape}")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("histogram counts must be non-negative")
    sp, sq = p.sum(), q.sum()
    if sp == 0 or sq == 0:
        return 0.0 if sp == sq else 1.0
    return float(0.5 * np.abs(p / sp - q / sq).sum())


def moving_average(values, window: int) -> np.ndarray:
    """Centred moving average with edge windows truncated (window must be odd)."""
    values = np.asarray(values, dtype=np.float64)
    if window < 1 or window % 2 == 0:
        raise ValueError("smoothing window must be a positive odd integer")
    if window == 1 or len(values) == 0:
        return values.copy()
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(len(values))
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, len(values))
    return (csum[hi] - csum[lo]) / (hi - lo)
