"""Netpbm reader/writer (P2, P3, P5, P6) for demo inputs. Values are scaled to [0, 1]."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import CtenIOError


def _tokens(buf: bytes, count: int, pos: int):
    out = []
    n = len(buf)
    while len(out) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise CtenIOError("truncated netpbm header")
        out.append(buf[start:pos])
    return out, pos


def decode(buf: bytes) -> np.ndarray:
    """Return an (H, W, 3) float array; grayscale images are replicated to three channels."""
    magic = buf[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise CtenIOError(f"not a PGM/PPM image (magic {magic!r})")
    try:
        (w, h, maxval), pos = _tokens(buf, 3, 2)
        W, H, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise CtenIOError("malformed netpbm header") from None
    if W < 1 or H < 1 or not 0 < maxval < 65536:
        raise CtenIOError(f"bad netpbm header: {W}x{H}, maxval {maxval}")
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = W * H * channels
    if magic in (b"P5", b"P6"):
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        data = buf[pos + 1:]
        if len(data) < count * dtype.itemsize:
            raise CtenIOError("truncated netpbm pixel data")
        vals = np.frombuffer(data, dtype=dtype, count=count).astype(np.float64)
    else:
        try:
            toks, _ = _tokens(buf, count, pos)
            vals = np.array([int(t) for t in toks], dtype=np.float64)
        except ValueError:
            raise CtenIOError("bad sample in ASCII netpbm data") from None
    if vals.max(initial=0) > maxval:
        raise CtenIOError("sample exceeds maxval")
    img = vals.reshape(H, W, channels) / maxval
    return np.repeat(img, 3, axis=2) if channels == 1 else img


def read(path) -> np.ndarray:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise CtenIOError(f"cannot read {path}: {exc}") from exc
    return decode(buf)


def encode(image) -> bytes:
    """Binary P6 with maxval 255."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 image, got {img.shape}")
    q = np.round(np.clip(img, 0, 1) * 255).astype(np.uint8)
    return f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode() + q.tobytes()


def write(path, image) -> None:
    try:
        Path(path).write_bytes(encode(image))
    except OSError as exc:
        raise CtenIOError(f"cannot write {path}: {exc}") from exc
