"""ZMAT: a minimal little-endian binary container for dense float64 matrices.

Layout::

    offset  size  field
    0       4     magic b"ZMAT"
    4       4     version (u32) = 1
    8       8     rows (u64)
    16      8     cols (u64)
    24      8*n   row-major float64 payload, n = rows * cols
"""

from __future__ import annotations

import io
import os
import struct
from typing import BinaryIO, Union

import numpy as np

from .exceptions import CorruptFile, FormatError, InvalidValue, ShapeError, UnsupportedVersion

MAGIC = b"ZMAT"
VERSION = 1
HEADER = struct.Struct("<4sIQQ")
HEADER_SIZE = HEADER.size  # 24

PathOrStream = Union[str, os.PathLike, BinaryIO]


def to_bytes(m) -> bytes:
    """Serialize a 2-D array to ZMAT bytes."""
    m = np.asarray(m)
    if m.ndim != 2:
        raise ShapeError(f"ZMAT stores 2-D matrices, got ndim={m.ndim}")
    m = np.ascontiguousarray(m, dtype="<f8")
    _check_finite(m.ravel())
    rows, cols = m.shape
    return HEADER.pack(MAGIC, VERSION, rows, cols) + m.tobytes(order="C")


def from_bytes(buf: bytes) -> np.ndarray:
    """Parse ZMAT bytes into a float64 array of shape (rows, cols)."""
    if len(buf) < HEADER_SIZE:
        if len(buf) >= 4 and buf[:4] != MAGIC:
            raise FormatError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}")
        raise CorruptFile(f"stream too short for header: {len(buf)} bytes")
    magic, version, rows, cols = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"ZMAT version {version} (only {VERSION} is supported)")
    expected = HEADER_SIZE + 8 * rows * cols
    if len(buf) != expected:
        raise CorruptFile(
            f"header declares {rows}x{cols} ({expected} bytes) but stream has {len(buf)} bytes"
        )
    data = np.frombuffer(buf, dtype="<f8", offset=HEADER_SIZE, count=rows * cols)
    _check_finite(data)
    return data.astype(np.float64).reshape(rows, cols)


def write_matrix(m, destination: PathOrStream) -> int:
    """Write ``m`` to a path or binary stream; returns the number of bytes written."""
    payload = to_bytes(m)
    if hasattr(destination, "write"):
        destination.write(payload)
        return len(payload)
    try:
        with open(destination, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"cannot write ZMAT file {os.fspath(destination)}: {exc}") from exc
    return len(payload)


def read_matrix(source: PathOrStream) -> np.ndarray:
    if hasattr(source, "read"):
        buf = source.read()
    else:
        with open(source, "rb") as fh:
            buf = fh.read()
    return from_bytes(bytes(buf))


def write_labels(labels, destination: PathOrStream) -> int:
    """Labels are stored as a 1xN ZMAT of integral-valued floats."""
    labels = np.asarray(labels, dtype=np.float64).reshape(1, -1)
    return write_matrix(labels, destination)


def read_labels(source: PathOrStream) -> np.ndarray:
    m = read_matrix(source)
    if m.shape[0] != 1 and m.size:
        raise ShapeError(f"label file must be a 1xN matrix, got {m.shape[0]}x{m.shape[1]}")
    flat = m.ravel()
    bad = np.flatnonzero((flat != np.round(flat)) | (flat < 0))
    if bad.size:
        raise InvalidValue(f"label at index {bad[0]} is not a non-negative integer: {flat[bad[0]]!r}")
    return flat.astype(np.int64)


def _check_finite(flat: np.ndarray) -> None:
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        raise InvalidValue(f"non-finite entry at flat index {bad[0]}: {flat[bad[0]]!r}")


def roundtrip(m) -> np.ndarray:
    """Write then read through an in-memory stream."""
    buf = io.BytesIO()
    write_matrix(m, buf)
    buf.seek(0)
    return read_matrix(buf)
