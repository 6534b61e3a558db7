"""Minimal PGM (P2/P5) reader and writer; pixel values map to [0, 1]."""
from __future__ import annotations

import numpy as np


class PGMError(ValueError):
    pass


def _tokens(data: bytes):
    """Yield header tokens, skipping comments; returns the offset after the last one."""
    i, n = 0, len(data)
    while i < n:
        c = data[i : i + 1]
        if c == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            yield data[i:j], j
            i = j


def read_pgm(path):
    """Read a PGM file and return a float array in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    toks = _tokens(data)
    try:
        magic, _ = next(toks)
        width, _ = next(toks)
        height, _ = next(toks)
        maxval, end = next(toks)
        width, height, maxval = int(width), int(height), int(maxval)
    except (StopIteration, ValueError) as exc:
        raise PGMError(f"{path}: malformed PGM header") from exc
    if magic not in (b"P2", b"P5"):
        raise PGMError(f"{path}: unsupported magic {magic!r}")
    if not 0 < maxval < 65536:
        raise PGMError(f"{path}: bad maxval {maxval}")
    count = width * height
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[end + 1 : end + 1 + count * dtype.itemsize]
        if len(raw) != count * dtype.itemsize:
            raise PGMError(f"{path}: truncated pixel data")
        pix = np.frombuffer(raw, dtype=dtype).astype(np.int64)
    else:
        pix = np.array([int(t) for t in data[end:].split()], dtype=np.int64)
        if pix.size != count:
            raise PGMError(f"{path}: expected {count} samples, found {pix.size}")
    if pix.max(initial=0) > maxval:
        raise PGMError(f"{path}: sample exceeds maxval")
    return pix.reshape(height, width) / float(maxval)


def quantize(img, maxval=255):
    """Clamp to [0, 1] and round to the integer grid ``0..maxval``."""
    img = np.clip(np.asarray(img, dtype=float), 0.0, 1.0)
    return np.rint(img * maxval).astype(np.int64)


def write_pgm(path, img, maxval=255, binary=True):
    """Write ``img`` (values in [0, 1], clamped) as P5 or P2."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise PGMError("PGM images must be 2-D")
    if maxval not in (255, 65535):
        raise PGMError("maxval must be 255 or 65535")
    q = quantize(img, maxval)
    h, w = q.shape
    header = f"{'P5' if binary else 'P2'}\n{w} {h}\n{maxval}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        if binary:
            dtype = ">u2" if maxval > 255 else "u1"
            fh.write(q.astype(dtype).tobytes())
        else:
            lines = (" ".join(str(v) for v in row) for row in q)
            fh.write(("\n".join(lines) + "\n").encode("ascii"))
