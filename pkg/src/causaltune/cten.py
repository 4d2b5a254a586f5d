"""CTEN: a minimal named-tensor container.

Layout, all little-endian::

    b"CTEN"  u16 version  u32 entry_count
    per entry:  u32 name_len  name (UTF-8)  u8 rank  u32 dims[rank]  f64 payload[prod(dims)]

Payloads are row-major IEEE-754 doubles, so a write/read cycle is bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CtenIOError

MAGIC = b"CTEN"
VERSION = 1


def dumps(tensors: dict) -> bytes:
    out = [MAGIC, struct.pack("<HI", VERSION, len(tensors))]
    for name, value in tensors.items():
        a = np.asarray(value, dtype="<f8")
        raw = name.encode("utf-8")
        if a.ndim > 255:
            raise CtenIOError(f"tensor {name!r} has rank {a.ndim} > 255")
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
        out.append(struct.pack("<B", a.ndim))
        out.append(struct.pack(f"<{a.ndim}I", *a.shape))
        out.append(a.tobytes(order="C"))
    return b"".join(out)


def loads(buf: bytes) -> dict:
    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise CtenIOError("truncated CTEN data")
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    pos = 0
    if take(4) != MAGIC:
        raise CtenIOError("not a CTEN file (bad magic)")
    version, count = struct.unpack("<HI", take(6))
    if version != VERSION:
        raise CtenIOError(f"unsupported CTEN version {version}")
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        try:
            name = take(nlen).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CtenIOError("tensor name is not valid UTF-8") from exc
        if name in tensors:
            raise CtenIOError(f"duplicate tensor name {name!r}")
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        data = np.frombuffer(take(8 * size), dtype="<f8").astype(np.float64)
        tensors[name] = data.reshape(dims)
    if pos != len(buf):
        raise CtenIOError(f"{len(buf) - pos} trailing bytes after last entry")
    return tensors


def save(path, tensors: dict) -> None:
    try:
        Path(path).write_bytes(dumps(tensors))
    except OSError as exc:
        raise CtenIOError(f"cannot write {path}: {exc}") from exc


def load(path) -> dict:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise CtenIOError(f"cannot read {path}: {exc}") from exc
    return loads(buf)
