"""Discrete DNA <-> one-hot matrices, and FASTA text I/O.

One-hot matrices are ``4 x L`` with rows in the fixed channel order
A, T, G, C. The ambiguous base ``N`` maps to the uniform column
``(0.25, 0.25, 0.25, 0.25)``.
"""
from __future__ import annotations

import io
from typing import Iterable, TextIO

import numpy as np

CHANNEL_ORDER = "ATGC"
ALPHABET = frozenset("ACGTN")

_LUT = np.zeros((256, 4), dtype=np.float64)
_VALID = np.zeros(256, dtype=bool)
for _i, _b in enumerate(CHANNEL_ORDER):
    _LUT[ord(_b), _i] = 1.0
    _VALID[ord(_b)] = True
_LUT[ord("N")] = 0.25
_VALID[ord("N")] = True
_CHANNEL_BYTES = np.frombuffer(CHANNEL_ORDER.encode(), dtype=np.uint8)


class SequenceError(ValueError):
    """Invalid character in a nucleotide sequence."""

    def __init__(self, message: str, position: int | None = None, record: str | None = None):
        super().__init__(message)
        self.position = position
        self.record = record


class FastaParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NucleotideSequence(str):
    """Upper-cased string over A, C, G, T, N.

    >>> NucleotideSequence("acgtn")
    'ACGTN'
    """

    def __new__(cls, bases: str):
        if isinstance(bases, NucleotideSequence):
            return bases
        upper = str(bases).upper()
        if not upper:
            raise SequenceError("empty sequence")
        raw = np.frombuffer(upper.encode("latin-1", errors="replace"), dtype=np.uint8)
        bad = np.flatnonzero(~_VALID[raw])
        if bad.size or len(raw) != len(upper):
            pos = int(bad[0]) if bad.size else next(i for i, ch in enumerate(upper) if ch not in ALPHABET)
            raise SequenceError(f"invalid base {upper[pos]!r} at position {pos}", position=pos)
        return super().__new__(cls, upper)

    @property
    def has_ambiguity(self) -> bool:
        return "N" in self


def one_hot_encode(seq: str, dtype=np.float32) -> np.ndarray:
    """Encode one sequence as a ``(4, L)`` matrix."""
    seq = NucleotideSequence(seq)
    idx = np.frombuffer(seq.encode("ascii"), dtype=np.uint8)
    return _LUT[idx].T.astype(dtype)


def one_hot_batch(seqs: Iterable[str], dtype=np.float32) -> np.ndarray:
    """Encode equal-length sequences as ``(N, 4, L)``."""
    seqs = [NucleotideSequence(s) for s in seqs]
    if not seqs:
        return np.zeros((0, 4, 0), dtype=dtype)
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        raise ValueError(f"sequences have differing lengths {sorted(lengths)}")
    raw = np.frombuffer("".join(seqs).encode("ascii"), dtype=np.uint8).reshape(len(seqs), -1)
    return _LUT[raw].transpose(0, 2, 1).astype(dtype)


def decode_argmax(matrix) -> NucleotideSequence | list[NucleotideSequence]:
    """Quantise ``(4, L)`` (or batched ``(N, 4, L)``) scores to bases.

    Ties go to the earlier channel in A, T, G, C order.
    """
    m = np.asarray(matrix)
    if not np.all(np.isfinite(m)):
        raise ValueError("cannot decode non-finite scores")
    if m.ndim == 2:
        if m.shape[0] != 4:
            raise ValueError(f"expected 4 channel rows, got shape {m.shape}")
        return NucleotideSequence(_CHANNEL_BYTES[m.argmax(axis=0)].tobytes().decode("ascii"))
    if m.ndim == 3 and m.shape[1] == 4:
        idx = m.argmax(axis=1)
        return [NucleotideSequence(_CHANNEL_BYTES[row].tobytes().decode("ascii")) for row in idx]
    raise ValueError(f"expected (4, L) or (N, 4, L), got shape {m.shape}")


def parse_fasta(source: str | TextIO | Iterable[str]) -> list[tuple[str, NucleotideSequence]]:
    """Parse FASTA text into ``(header, sequence)`` pairs.

    ``source`` may be the text itself or an open text stream. Multi-line
    records are concatenated, blank lines are skipped.
    """
    lines = io.StringIO(source) if isinstance(source, str) else source
    records: list[tuple[str, NucleotideSequence]] = []
    header: str | None = None
    chunks: list[str] = []

    def flush():
        if header is None:
            return
        body = "".join(chunks)
        if not body:
            raise SequenceError(f"record {header!r} has no sequence", record=header)
        try:
            records.append((header, NucleotideSequence(body)))
        except SequenceError as exc:
            raise SequenceError(
                f"record {header!r}: invalid base at offset {exc.position}", position=exc.position, record=header
            ) from None

    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith(">"):
            flush()
            header = line[1:].strip()
            chunks = []
        elif header is None:
            raise FastaParseError("sequence data before the first header", lineno)
        else:
            chunks.append(line)
    flush()
    return records


def read_fasta(path) -> list[tuple[str, NucleotideSequence]]:
    with open(path, encoding="utf-8") as f:
        return parse_fasta(f)


def write_fasta(records: Iterable[tuple[str, str]], stream: TextIO, width: int = 60) -> None:
    for header, seq in records:
        stream.write(f">{header}\n")
        for i in range(0, len(seq), width):
            stream.write(seq[i : i + width] + "\n")


def format_fasta(records: Iterable[tuple[str, str]], width: int = 60) -> str:
    buf = io.StringIO()
    write_fasta(records, buf, width)
    return buf.getvalue()
