"""The ``DDKP`` named-array container.

Layout (all integers little-endian)::

    b"DDKP"            magic
    u16                format version (1)
    u8                 precision flag: 0 = float32, 1 = float64
    u8                 reserved (0)
    u64                record count
    per record:
      u32              name length in bytes
      bytes            UTF-8 name
      u64              rank
      u64 * rank       dimensions
      float * prod     row-major little-endian payload
"""
from __future__ import annotations

import io
import os
import struct
from typing import BinaryIO, Mapping

import numpy as np

MAGIC = b"DDKP"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


class CheckpointError(ValueError):
    pass


def _precision_flag(precision) -> int:
    dt = np.dtype(precision)
    if dt == np.float32:
        return 0
    if dt == np.float64:
        return 1
    raise CheckpointError(f"unsupported precision {precision!r}")


def dumps(arrays: Mapping[str, np.ndarray], precision=np.float32) -> bytes:
    flag = _precision_flag(precision)
    dt = _DTYPES[flag]
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HBBQ", VERSION, flag, 0, len(arrays)))
    for name, arr in arrays.items():
        raw = name.encode("utf-8")
        arr = np.array(arr, dtype=dt, order="C")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<Q", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(arr.tobytes(order="C"))
    return buf.getvalue()


def _read(f: BinaryIO, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def loads(data: bytes) -> tuple[dict[str, np.ndarray], np.dtype]:
    f = io.BytesIO(data)
    if _read(f, 4, "magic") != MAGIC:
        raise CheckpointError("not a DDKP checkpoint (bad magic)")
    version, flag, _reserved, count = struct.unpack("<HBBQ", _read(f, 12, "header"))
    if version != VERSION:
        raise CheckpointError(f"unsupported DDKP version {version}")
    if flag not in _DTYPES:
        raise CheckpointError(f"unknown precision flag {flag}")
    dt = _DTYPES[flag]
    out: dict[str, np.ndarray] = {}
    for i in range(count):
        (nlen,) = struct.unpack("<I", _read(f, 4, f"record {i} name length"))
        name = _read(f, nlen, f"record {i} name").decode("utf-8")
        (rank,) = struct.unpack("<Q", _read(f, 8, f"{name} rank"))
        dims = struct.unpack(f"<{rank}Q", _read(f, 8 * rank, f"{name} dims"))
        nbytes = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
        payload = _read(f, nbytes, f"{name} payload")
        out[name] = np.frombuffer(payload, dtype=dt).reshape(dims).astype(dt.newbyteorder("="))
    if f.read(1):
        raise CheckpointError("trailing bytes after last record")
    return out, np.dtype(dt.newbyteorder("="))


def save(path: str | os.PathLike, arrays: Mapping[str, np.ndarray], precision=np.float32) -> None:
    with open(path, "wb") as f:
        f.write(dumps(arrays, precision))


def load(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        arrays, _ = loads(f.read())
    return arrays
