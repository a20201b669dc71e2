"""Image file I/O and synthetic inputs.

PGM covers the integer kinds (P2 ASCII and P5 binary, 8- and 16-bit);
maxval 1 marks a two-level image. Float images travel as raw
little-endian files with a small text sidecar, since PGM has no float
variant. Synthetic masks are unions of random ellipses grown to a
requested coverage; markers are mask-minus-h clamped at zero.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ContractViolation, PgmFormatError
from .grid import BG, FG, Image2D


# ---------------------------------------------------------------------------
# PGM

class _Tokens:
    """Whitespace/comment-aware scanner over a PGM header and P2 body."""

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def skip_separators(self):
        b = self.buf
        n = len(b)
        while self.pos < n:
            c = b[self.pos]
            if c in b" \t\r\n\x0b\x0c":
                self.pos += 1
            elif c == ord("#"):
                while self.pos < n and b[self.pos] not in b"\r\n":
                    self.pos += 1
            else:
                return

    def token(self, what: str) -> bytes:
        self.skip_separators()
        if self.pos >= len(self.buf):
            raise PgmFormatError(f"unexpected end of stream reading {what}", self.pos)
        start = self.pos
        b = self.buf
        while self.pos < len(b) and b[self.pos] not in b" \t\r\n\x0b\x0c#":
            self.pos += 1
        return b[start : self.pos]

    def integer(self, what: str) -> int:
        self.skip_separators()
        start = self.pos
        tok = self.token(what)
        if not tok.isdigit():
            raise PgmFormatError(f"bad {what} token {tok!r}", start)
        return int(tok)


def read_pgm(path: str) -> Image2D:
    """Read a P2 or P5 file. maxval 1 gives a binary image (samples mapped
    to {BG, FG}), other maxvals up to 255 give u8, larger (up to 65535)
    give u16 with big-endian sample pairs as the format dictates."""
    with open(path, "rb") as f:
        buf = f.read()
    t = _Tokens(buf)
    magic = t.token("magic")
    if magic not in (b"P2", b"P5"):
        raise PgmFormatError(f"unsupported magic {magic!r}", 0)
    width = t.integer("width")
    height = t.integer("height")
    if width < 1 or height < 1:
        raise PgmFormatError(f"bad dimensions {width}x{height}", t.pos)
    maxval = t.integer("maxval")
    if not 1 <= maxval <= 65535:
        raise PgmFormatError(f"maxval {maxval} out of range", t.pos)
    if maxval == 1:
        kind, dt = "binary", np.uint8
    elif maxval <= 255:
        kind, dt = "u8", np.uint8
    else:
        kind, dt = "u16", np.uint16
    n = width * height

    if magic == b"P5":
        # exactly one separator byte after maxval, then the raster
        if t.pos >= len(buf) or buf[t.pos] not in b" \t\r\n\x0b\x0c":
            raise PgmFormatError("missing separator before raster", t.pos)
        at = t.pos + 1
        per = 1 if maxval <= 255 else 2
        need = n * per
        if len(buf) - at < need:
            raise PgmFormatError(
                f"raster truncated: need {need} bytes, have {len(buf) - at}", len(buf)
            )
        raw = buf[at : at + need]
        if per == 1:
            data = np.frombuffer(raw, dtype=np.uint8)
        else:
            data = np.frombuffer(raw, dtype=">u2").astype(np.uint16)
    else:
        vals = np.empty(n, dtype=np.int64)
        for i in range(n):
            vals[i] = t.integer("sample")
        data = vals
    if data.max(initial=0) > maxval:
        raise PgmFormatError(f"sample exceeds maxval {maxval}", t.pos)
    img = data.astype(np.int64).reshape(height, width)
    if kind == "binary":
        img = np.where(img != 0, FG, BG)
    return Image2D(width, height, kind, np.ascontiguousarray(img.astype(dt)))


def write_pgm(img: Image2D, path: str) -> None:
    """Write a P5 file. u8 and binary images use maxval 255, u16 uses
    65535 (big-endian). Float images have no PGM form."""
    if img.elem_kind == "f32":
        raise ContractViolation("f32 images cannot be written as PGM")
    if img.elem_kind == "u16":
        maxval = 65535
        payload = img.data.astype(">u2").tobytes()
    else:
        maxval = 255
        payload = img.data.astype(np.uint8).tobytes()
    header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode()
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(header)
        f.write(payload)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# raw float maps

def write_f32_raw(img: Image2D, path: str) -> None:
    """Raw little-endian float32, row-major, with a text sidecar at
    path + '.hdr' holding one line: '{width} {height} f32le'."""
    if img.elem_kind != "f32":
        raise ContractViolation("write_f32_raw requires an f32 image")
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(img.data.astype("<f4").tobytes())
    os.replace(tmp, path)
    with open(path + ".hdr", "w") as f:
        f.write(f"{img.width} {img.height} f32le\n")


def read_f32_raw(path: str) -> Image2D:
    with open(path + ".hdr") as f:
        fields = f.read().split()
    if len(fields) != 3 or fields[2] != "f32le":
        raise ContractViolation(f"unrecognized raw float header {fields!r}")
    w, h = int(fields[0]), int(fields[1])
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != w * h:
        raise ContractViolation(
            f"raw float file holds {raw.size} samples, header says {w * h}"
        )
    return Image2D(w, h, "f32", np.ascontiguousarray(raw.astype(np.float32).reshape(h, w)))


# ---------------------------------------------------------------------------
# synthetic inputs

def gen_synthetic_mask(width: int, height: int, coverage_pct: float, seed: int) -> Image2D:
    """Binary mask as a union of random ellipses, grown one ellipse at a
    time until foreground coverage lands within 2 percentage points of the
    request. 0 and 100 short-circuit to empty/full."""
    if not 0 <= coverage_pct <= 100:
        raise ContractViolation(f"coverage_pct {coverage_pct} out of [0, 100]")
    img = Image2D.zeros(width, height, "binary")
    if coverage_pct <= 0:
        return img
    if coverage_pct >= 100:
        img.data[:] = FG
        return img
    rng = np.random.default_rng(seed)
    fg = np.zeros((height, width), dtype=bool)
    total = width * height
    lo, hi = coverage_pct - 2.0, coverage_pct + 2.0
    # small ellipses so each step moves coverage by a few points at most
    amin = 2.0
    amax = max(2.0, 0.08 * min(width, height))
    for _ in range(100_000):
        pct = 100.0 * fg.sum() / total
        if lo <= pct <= hi:
            break
        if pct > hi:  # a huge ellipse overshot; retreat is impossible, so fail
            raise ContractViolation("coverage overshot the tolerance window")
        cx = rng.uniform(0, width)
        cy = rng.uniform(0, height)
        a = rng.uniform(amin, amax)
        b = rng.uniform(amin, amax)
        x0 = max(int(cx - a) - 1, 0)
        x1 = min(int(cx + a) + 2, width)
        y0 = max(int(cy - b) - 1, 0)
        y1 = min(int(cy + b) + 2, height)
        ys = np.arange(y0, y1)[:, None]
        xs = np.arange(x0, x1)[None, :]
        inside = ((xs - cx) / a) ** 2 + ((ys - cy) / b) ** 2 <= 1.0
        patch = fg[y0:y1, x0:x1]
        # would this ellipse overshoot? clip it by skipping instead
        gain = int(inside.sum()) - int((patch & inside).sum())
        if 100.0 * (fg.sum() + gain) / total > hi:
            continue
        patch |= inside
    else:
        raise ContractViolation("coverage target not reached")
    img.data[fg] = FG
    return img


def gen_marker(mask: Image2D, h: int) -> Image2D:
    """Marker for h-reconstruction: max(mask - h, 0) per cell. Defined for
    the integer and float kinds; a two-level image has no useful h-marker."""
    if mask.elem_kind == "binary":
        raise ContractViolation("h-marker is undefined for binary images")
    if h < 0:
        raise ContractViolation("h must be >= 0")
    a = mask.data
    if mask.elem_kind == "f32":
        out = np.maximum(a - np.float32(h), np.float32(0)).astype(np.float32)
    else:
        out = np.maximum(a.astype(np.int64) - h, 0).astype(a.dtype)
    return Image2D(mask.width, mask.height, mask.elem_kind, out)
