"""Bit-exact named-tensor container.

Layout: magic ``VTF1``; u32 little-endian record count; per record a u16
name length, the UTF-8 name, a u8 rank (1..5), rank u32 extents, then
``prod(extents)`` float32 little-endian values in row-major order.
"""
from __future__ import annotations

import struct

import numpy as np

MAGIC = b"VTF1"
MAX_RANK = 5


class FormatError(ValueError):
    """Raised when a tensor container is malformed."""


def write_tensors(path, tensors: dict) -> None:
    """Write named float32 tensors to ``path`` in insertion order."""
    chunks = [MAGIC, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        if not 1 <= arr.ndim <= MAX_RANK:
            raise FormatError(f"tensor {name!r} has rank {arr.ndim}, supported range is 1..{MAX_RANK}")
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise FormatError(f"tensor name too long ({len(encoded)} bytes)")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def read_tensors(path) -> dict:
    """Read a container written by write_tensors; preserves record order."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 8 or buf[:4] != MAGIC:
        raise FormatError(f"bad magic in {path}: expected {MAGIC!r}")
    (count,) = struct.unpack_from("<I", buf, 4)
    pos = 8
    out = {}
    for _ in range(count):
        pos, name_len = _take(buf, pos, "<H")
        if pos + name_len > len(buf):
            raise FormatError("truncated tensor name")
        name = buf[pos:pos + name_len].decode("utf-8")
        pos += name_len
        pos, rank = _take(buf, pos, "<B")
        if not 1 <= rank <= MAX_RANK:
            raise FormatError(f"tensor {name!r} has rank {rank}, supported range is 1..{MAX_RANK}")
        if pos + 4 * rank > len(buf):
            raise FormatError(f"truncated dims for tensor {name!r}")
        dims = struct.unpack_from(f"<{rank}I", buf, pos)
        pos += 4 * rank
        size = int(np.prod(dims, dtype=np.int64))
        if pos + 4 * size > len(buf):
            raise FormatError(f"truncated payload for tensor {name!r}")
        data = np.frombuffer(buf, dtype="<f4", count=size, offset=pos).reshape(dims)
        pos += 4 * size
        out[name] = data.copy()
    return out


def _take(buf: bytes, pos: int, fmt: str):
    size = struct.calcsize(fmt)
    if pos + size > len(buf):
        raise FormatError("truncated container")
    (value,) = struct.unpack_from(fmt, buf, pos)
    return pos + size, value
