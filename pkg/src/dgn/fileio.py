"""Low-level helpers for the little-endian binary artifact formats.

All writers go through :func:`atomic_write_bytes` so a failure never leaves
a partially written output file behind.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError

FORMAT_VERSION = 1


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write ``data`` to ``path`` via a sibling temp file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def pack_u32(*values: int) -> bytes:
    return struct.pack("<" + "I" * len(values), *values)


def pack_u8(value: int) -> bytes:
    return struct.pack("<B", value)


def pack_f64(value: float) -> bytes:
    return struct.pack("<d", value)


class Reader:
    """Sequential reader over an in-memory payload with truncation checks."""

    def __init__(self, data: bytes, label: str):
        self._data = data
        self._pos = 0
        self._label = label

    def magic(self, expected: bytes) -> None:
        if len(self._data) < self._pos + 4 or self._data[self._pos : self._pos + 4] != expected:
            raise FormatError(f"{self._label}: missing {expected.decode()} magic")
        self._pos += 4

    def version(self) -> None:
        got = self.u32()
        if got != FORMAT_VERSION:
            raise FormatError(f"{self._label}: unsupported version {got}")

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise EOFError(
                f"{self._label}: truncated payload "
                f"(needed {n} bytes at offset {self._pos}, have {len(self._data)})"
            )
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def array(self, dtype: str, count: int) -> np.ndarray:
        nbytes = np.dtype(dtype).itemsize * count
        return np.frombuffer(self.take(nbytes), dtype=dtype).copy()

    def done(self) -> None:
        if self._pos != len(self._data):
            raise FormatError(f"{self._label}: {len(self._data) - self._pos} trailing bytes")
