"""SECD binary tensor files.

Little-endian layout:

    magic   4 bytes   b"SECD"
    version u16       1
    dtype   u8        1 = float32 (the only v1 payload type)
    ndim    u8
    dims    ndim * u32
    payload row-major float32

Reads are strict: short or oversized payloads, unknown versions or
dtypes, and shapes past the element budget are all rejected.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, ShapeOverflow, TruncatedPayload, VersionUnsupported

MAGIC = b"SECD"
VERSION = 1
DTYPE_F32 = 1
MAX_ELEMENTS = 1 << 31  # v1 budget: 8 GiB of float32
_HEADER = struct.Struct("<4sHBB")


def write_tensor(path, array) -> None:
    """Write a float32 tensor; other dtypes are converted."""
    arr = np.asarray(array, dtype="<f4")
    if arr.ndim > 255:
        raise ShapeOverflow(f"too many dimensions: {arr.ndim}")
    if arr.size > MAX_ELEMENTS:
        raise ShapeOverflow(f"{arr.size} elements exceeds the v1 budget")
    if any(d > 0xFFFFFFFF for d in arr.shape):
        raise ShapeOverflow(f"dimension too large for u32: {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, DTYPE_F32, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes(order="C"))


def read_tensor(path) -> np.ndarray:
    """Read a SECD file into a float32 array of the declared shape."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedPayload(f"{path}: file shorter than the header")
    magic, version, dtype, ndim = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"{path}: expected {MAGIC!r}, found {magic!r}")
    if version != VERSION:
        raise VersionUnsupported(f"{path}: version {version} (reader supports {VERSION})")
    if dtype != DTYPE_F32:
        raise VersionUnsupported(f"{path}: dtype code {dtype} (v1 carries float32 only)")
    dims_end = _HEADER.size + 4 * ndim
    if len(data) < dims_end:
        raise TruncatedPayload(f"{path}: header declares {ndim} dims but ends early")
    dims = struct.unpack_from(f"<{ndim}I", data, _HEADER.size)
    count = math.prod(dims)
    if count > MAX_ELEMENTS:
        raise ShapeOverflow(f"{path}: shape {dims} exceeds the v1 element budget")
    payload = data[dims_end:]
    if len(payload) != 4 * count:
        raise TruncatedPayload(
            f"{path}: shape {dims} needs {4 * count} payload bytes, found {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
