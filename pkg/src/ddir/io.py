"""Image and sinogram serialisation: lossless CSV and 8-bit portable graymaps."""
from __future__ import annotations

import csv
import os

import numpy as np

__all__ = ["ImageFormatError", "save_csv", "load_csv", "save_pgm", "load_pgm",
           "save_image", "load_image"]


class ImageFormatError(ValueError):
    """Malformed image file; ``offset`` is the byte offset of the problem."""

    def __init__(self, message, path=None, offset=None):
        self.path = path
        self.offset = offset
        where = f" at byte {offset}" if offset is not None else ""
        src = f"{path}: " if path is not None else ""
        super().__init__(f"{src}{message}{where}")


def save_csv(arr, path):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("only 2-D arrays can be written as CSV")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in arr:
            # repr() of a float round-trips exactly
            writer.writerow([repr(float(x)) for x in row])


def load_csv(path):
    rows = []
    offset = 0
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh):
            line = raw.decode("ascii", errors="replace").strip()
            if line:
                try:
                    rows.append([float(tok) for tok in line.split(",")])
                except ValueError:
                    raise ImageFormatError(f"non-numeric entry on line {lineno + 1}",
                                           path, offset) from None
                if len(rows[-1]) != len(rows[0]):
                    raise ImageFormatError(f"ragged row on line {lineno + 1}", path, offset)
            offset += len(raw)
    if not rows:
        raise ImageFormatError("empty CSV image", path, 0)
    return np.array(rows, dtype=np.float64)


def _quantize(arr, normalize):
    arr = np.asarray(arr, dtype=np.float64)
    if normalize:
        lo, hi = float(arr.min()), float(arr.max())
        arr = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def save_pgm(arr, path, binary=True, normalize=False):
    """Write a graymap with maxval 255, mapping [0, 1] linearly onto [0, 255].

    ``normalize`` min-max rescales first (used for sinograms, which are for
    inspection only).
    """
    data = _quantize(arr, normalize)
    h, w = data.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(data.tobytes())
        else:
            fh.write(f"P2\n{w} {h}\n255\n".encode("ascii"))
            for row in data:
                fh.write((" ".join(str(int(x)) for x in row) + "\n").encode("ascii"))


def _read_header_tokens(buf, path, count):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    pos = 0
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise ImageFormatError("truncated header", path, pos)
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace():
            pos += 1
        tokens.append((buf[start:pos], start))
    return tokens, pos


def load_pgm(path):
    """Read a P2 or P5 graymap and return values scaled to [0, 1]."""
    with open(path, "rb") as fh:
        buf = fh.read()
    tokens, pos = _read_header_tokens(buf, path, 4)
    magic = tokens[0][0]
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(f"unsupported magic number {magic!r}", path, 0)
    values = []
    for tok, off in tokens[1:]:
        try:
            values.append(int(tok))
        except ValueError:
            raise ImageFormatError(f"bad header field {tok!r}", path, off) from None
    w, h, maxval = values
    if w <= 0 or h <= 0 or not 0 < maxval < 256:
        raise ImageFormatError("invalid dimensions or maxval", path, tokens[1][1])
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        need = w * h
        if len(buf) - pos < need:
            raise ImageFormatError(f"truncated pixel data: expected {need} bytes, "
                                   f"found {max(len(buf) - pos, 0)}", path, len(buf))
        data = np.frombuffer(buf, dtype=np.uint8, count=need, offset=pos).reshape(h, w)
    else:
        raw = buf[pos:].split()
        if len(raw) < w * h:
            raise ImageFormatError(f"truncated pixel data: expected {w * h} samples, "
                                   f"found {len(raw)}", path, len(buf))
        data = np.array([int(t) for t in raw[: w * h]], dtype=np.int64).reshape(h, w)
    return data.astype(np.float64) / maxval


def save_image(img, path):
    """Dispatch on extension: ``.csv`` is lossless, ``.pgm`` is 8-bit P5."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".csv":
        save_csv(img, path)
    elif ext in (".pgm", ".pnm"):
        save_pgm(img, path)
    else:
        raise ValueError(f"unknown image extension {ext!r}")


def load_image(path):
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".csv":
        return load_csv(path)
    if ext in (".pgm", ".pnm"):
        return load_pgm(path)
    raise ValueError(f"unknown image extension {ext!r}")
