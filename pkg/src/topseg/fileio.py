"""Low-level binary file helpers shared by the on-disk formats.

All multi-byte integers in the toolkit's binary files are little-endian
and all floating point payloads are IEEE 754 float32.  Writers go through
``atomic_write_bytes`` so a crashed process never leaves a half-written
file at the destination path.
"""

from __future__ import annotations

import os
import struct
import tempfile
from typing import BinaryIO

import numpy as np

from .errors import TruncatedFileError


def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write payload to path via a same-directory temp file + rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    """Read exactly n bytes or raise TruncatedFileError naming the field."""
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedFileError(
            f"unexpected end of file while reading {what} "
            f"(wanted {n} bytes, got {len(buf)})")
    return buf


def read_u8(fh: BinaryIO, what: str) -> int:
    return read_exact(fh, 1, what)[0]


def read_u16(fh: BinaryIO, what: str) -> int:
    return struct.unpack("<H", read_exact(fh, 2, what))[0]


def read_u32(fh: BinaryIO, what: str) -> int:
    return struct.unpack("<I", read_exact(fh, 4, what))[0]


def read_f32_array(fh: BinaryIO, count: int, what: str) -> np.ndarray:
    buf = read_exact(fh, 4 * count, what)
    return np.frombuffer(buf, dtype="<f4", count=count).astype(np.float32)


def pack_u8(v: int) -> bytes:
    return struct.pack("<B", v)


def pack_u16(v: int) -> bytes:
    return struct.pack("<H", v)


def pack_u32(v: int) -> bytes:
    return struct.pack("<I", v)


def pack_f32_array(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f4").tobytes()
