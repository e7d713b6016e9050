"""
Reader for the IDX container used by MNIST.

Layout (big endian): two zero bytes, one element-type byte, one byte with the
number of dimensions, one u32 per dimension, then the row-major payload.
"""
from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from multiview.errors import DataError

# element type byte -> big-endian numpy dtype
IDX_TYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


def _open(path: Path):
    # .gz files are read transparently
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError("file not found", path=path)
    with _open(path) as f:
        raw = f.read()

    if len(raw) < 4:
        raise DataError("truncated IDX header", path=path)
    zero, type_code, ndim = struct.unpack(">HBB", raw[:4])
    if zero != 0 or type_code not in IDX_TYPES:
        raise DataError(f"bad IDX magic number 0x{int.from_bytes(raw[:4], 'big'):08x}", path=path)
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise DataError("truncated IDX dimension list", path=path)
    shape = struct.unpack(f">{ndim}I", raw[4:header_end])

    dtype = IDX_TYPES[type_code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    payload = raw[header_end:]
    if len(payload) != expected:
        raise DataError(f"IDX payload holds {len(payload)} bytes, header promises {expected}", path=path)

    return np.frombuffer(payload, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))
