"""LTF: a minimal binary tensor format.

Layout:
    magic  b"LTF1"
    dtype  1 byte (0 = float64, 1 = uint8)
    rank   1 byte
    pad    2 bytes, must be zero
    dims   rank x u64, little-endian
    data   row-major payload, little-endian

Readers reject bad magic, unknown dtypes, nonzero padding and truncated
payloads. uint8 exists only to embed opaque byte blobs (e.g. the config
document inside a checkpoint archive); numeric tensors are always float64.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .errors import FormatError
from .tensor import Tensor

MAGIC = b"LTF1"
DTYPE_F64 = 0
DTYPE_U8 = 1

_DTYPES = {DTYPE_F64: np.dtype("<f8"), DTYPE_U8: np.dtype("u1")}
_CODES = {np.dtype("float64"): DTYPE_F64, np.dtype("uint8"): DTYPE_U8}


def write_stream(f: BinaryIO, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    if not arr.flags["C_CONTIGUOUS"]:
        arr = np.ascontiguousarray(arr)  # 0-d arrays are already contiguous
    code = _CODES.get(arr.dtype)
    if code is None:
        raise FormatError(f"unsupported dtype {arr.dtype}")
    if arr.ndim > 255:
        raise FormatError("rank exceeds 255")
    f.write(MAGIC)
    f.write(struct.pack("<BBH", code, arr.ndim, 0))
    for dim in arr.shape:
        f.write(struct.pack("<Q", dim))
    f.write(arr.astype(_DTYPES[code], copy=False).tobytes(order="C"))


def _read_exact(f: BinaryIO, n: int, path: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"{path}: truncated (wanted {n} bytes, got {len(buf)})")
    return buf


def read_stream(f: BinaryIO, path: str = "<stream>") -> np.ndarray:
    magic = _read_exact(f, 4, path)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    code, rank, pad = struct.unpack("<BBH", _read_exact(f, 4, path))
    if code not in _DTYPES:
        raise FormatError(f"{path}: unknown dtype code {code}")
    if pad != 0:
        raise FormatError(f"{path}: nonzero reserved bytes")
    dims = [struct.unpack("<Q", _read_exact(f, 8, path))[0] for _ in range(rank)]
    count = 1
    for dim in dims:
        count *= dim
    dtype = _DTYPES[code]
    payload = _read_exact(f, count * dtype.itemsize, path)
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def save_ltf(path, value: Tensor | np.ndarray) -> None:
    arr = value.data if isinstance(value, Tensor) else np.asarray(value)
    with open(path, "wb") as f:
        write_stream(f, arr)


def load_ltf(path) -> Tensor:
    """Read a float64 LTF file into a Tensor (exact round-trip of save_ltf)."""
    with open(path, "rb") as f:
        arr = read_stream(f, str(path))
        extra = f.read(1)
    if extra:
        raise FormatError(f"{path}: trailing bytes after payload")
    if arr.dtype != np.float64:
        raise FormatError(f"{path}: expected float64 payload")
    return Tensor(arr)
