"""Matrix exchange files: binary "DDMX" and plain CSV.

DDMX layout (little-endian): magic ``b"DDMX"``, u16 version, u8 precision
(0 = float32, 1 = float64), u8 reserved, u64 rows, u64 cols, then the
row-major payload.
"""
from __future__ import annotations

import io
import os
import struct

import numpy as np

MAGIC = b"DDMX"
VERSION = 1
_HEADER = struct.Struct("<4sHBBQQ")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


class MatrixFormatError(ValueError):
    pass


def dumps_matrix(m, dtype=np.float64) -> bytes:
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    flag = 0 if np.dtype(dtype) == np.float32 else 1
    payload = np.array(m, dtype=_DTYPES[flag], order="C").tobytes()
    return _HEADER.pack(MAGIC, VERSION, flag, 0, m.shape[0], m.shape[1]) + payload


def loads_matrix(raw: bytes) -> np.ndarray:
    if len(raw) < _HEADER.size:
        raise MatrixFormatError("truncated DDMX header")
    magic, version, flag, _, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MatrixFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise MatrixFormatError(f"unsupported DDMX version {version}")
    if flag not in _DTYPES:
        raise MatrixFormatError(f"unknown precision flag {flag}")
    dt = _DTYPES[flag]
    expected = _HEADER.size + rows * cols * dt.itemsize
    if len(raw) != expected:
        raise MatrixFormatError(f"payload size {len(raw)} does not match header ({expected} bytes)")
    data = np.frombuffer(raw, dtype=dt, offset=_HEADER.size, count=rows * cols)
    return data.reshape(rows, cols).astype(dt.newbyteorder("="))


def write_csv(path, m) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        for row in m:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv(path) -> np.ndarray:
    with open(path) as fh:
        text = fh.read()
    rows = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        return np.zeros((0, 0))
    try:
        m = np.loadtxt(io.StringIO("\n".join(rows)), delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: {exc}") from exc
    return m


def save_matrix(path, m, dtype=np.float64) -> None:
    """Write DDMX, or CSV when the path ends in ``.csv``."""
    if os.fspath(path).lower().endswith(".csv"):
        write_csv(path, m)
    else:
        with open(path, "wb") as fh:
            fh.write(dumps_matrix(m, dtype))


def load_matrix(path) -> np.ndarray:
    """Read a DDMX or CSV matrix file, chosen by content."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] == MAGIC:
        return loads_matrix(raw)
    return read_csv(path)
