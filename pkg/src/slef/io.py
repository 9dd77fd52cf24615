"""Reading and writing fields: portable float map, 8-bit PNG and CSV.

PFM stores float32, so a round trip is bit-exact for float32-representable
fields; float64 samples are rounded to float32 on save.
"""

from __future__ import annotations

import io as _io
import os

import numpy as np

from .errors import InvariantError, ParseError, SizeError
from .field import ScalarField, as_field

FORMATS = ("pfm", "png", "csv")
MAX_PIXELS = 1 << 28


def infer_format(path) -> str:
    ext = os.path.splitext(str(path))[1].lower().lstrip(".")
    if ext not in FORMATS:
        raise ValueError(f"cannot infer format from extension of {path!r}; use one of {FORMATS}")
    return ext


def _check_dims(width, height, offset=None):
    if width < 1 or height < 1:
        raise ParseError(f"invalid dimensions {width}x{height}", offset)
    if width * height > MAX_PIXELS:
        raise SizeError(f"dimensions {width}x{height} exceed {MAX_PIXELS} pixels")


# -- PFM ---------------------------------------------------------------------

def _next_token(buf: bytes, pos: int):
    n = len(buf)
    while pos < n and buf[pos:pos + 1].isspace():
        pos += 1
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ParseError("unexpected end of PFM header", start)
    return buf[start:pos], start, pos


def decode_pfm(buf: bytes) -> ScalarField:
    """Decode a single-channel (``Pf``) or RGB (``PF``, first channel kept) PFM."""
    magic, off, pos = _next_token(buf, 0)
    if magic not in (b"Pf", b"PF"):
        raise ParseError(f"bad PFM magic {magic[:8]!r}", off)
    channels = 1 if magic == b"Pf" else 3
    values = []
    for name in ("width", "height", "scale"):
        tok, off, pos = _next_token(buf, pos)
        try:
            values.append(int(tok) if name != "scale" else float(tok))
        except ValueError:
            raise ParseError(f"bad PFM {name} {tok[:16]!r}", off) from None
    width, height, scale = values
    _check_dims(width, height, off)
    if scale == 0.0 or not np.isfinite(scale):
        raise ParseError("PFM scale must be finite and non-zero", off)
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise ParseError("missing whitespace after PFM header", pos)
    pos += 1
    dtype = "<f4" if scale < 0 else ">f4"
    need = width * height * channels * 4
    if len(buf) - pos < need:
        raise ParseError(f"truncated PFM raster: need {need} bytes, have {len(buf) - pos}", len(buf))
    raster = np.frombuffer(buf, dtype=dtype, count=width * height * channels, offset=pos)
    raster = raster.reshape(height, width, channels)[:, :, 0]
    # PFM rows run bottom-to-top
    data = raster[::-1].astype(np.float64)
    if not np.all(np.isfinite(data)):
        bad = int(np.flatnonzero(~np.isfinite(data[::-1].ravel()))[0])
        raise ParseError("non-finite sample in PFM raster", pos + 4 * channels * bad)
    return ScalarField(data)


def encode_pfm(f) -> bytes:
    f = as_field(f)
    with np.errstate(over="ignore"):
        data32 = np.asarray(f.data, dtype=np.float32)
    if not np.all(np.isfinite(data32)):
        raise InvariantError("field overflows float32 and cannot be stored as PFM")
    header = f"Pf\n{f.width} {f.height}\n-1.0\n".encode("ascii")
    return header + data32[::-1].astype("<f4").tobytes()


# -- PNG ---------------------------------------------------------------------

def encode_png(f, value_range=(0.0, 1.0)) -> bytes:
    """Quantize linearly from ``value_range`` onto 0..255 (clipping outside)."""
    from PIL import Image

    f = as_field(f)
    lo, hi = value_range
    if not hi > lo:
        raise ValueError("value_range must be increasing")
    scaled = (np.asarray(f.data) - lo) / (hi - lo)
    q = np.clip(np.rint(scaled * 255.0), 0, 255).astype(np.uint8)
    out = _io.BytesIO()
    Image.fromarray(q, mode="L").save(out, format="PNG")
    return out.getvalue()


def decode_png(buf: bytes) -> ScalarField:
    from PIL import Image, UnidentifiedImageError

    try:
        img = Image.open(_io.BytesIO(buf))
        img.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise ParseError(f"cannot decode PNG: {exc}", 0) from None
    _check_dims(img.width, img.height)
    arr = np.asarray(img.convert("L"), dtype=np.float64)
    return ScalarField(arr / 255.0)


# -- CSV ---------------------------------------------------------------------

def encode_csv(f) -> bytes:
    f = as_field(f)
    lines = [",".join(repr(float(v)) for v in row) for row in f.data]
    return ("\n".join(lines) + "\n").encode("ascii")


def decode_csv(buf: bytes) -> ScalarField:
    rows = []
    offset = 0
    for line in buf.splitlines(keepends=True):
        text = line.strip()
        if text:
            try:
                rows.append([float(tok) for tok in text.split(b",")])
            except ValueError:
                raise ParseError("non-numeric CSV cell", offset) from None
            if len(rows[-1]) != len(rows[0]):
                raise ParseError(
                    f"ragged CSV: row {len(rows)} has {len(rows[-1])} cells, expected {len(rows[0])}",
                    offset,
                )
        offset += len(line)
    if not rows:
        raise ParseError("empty CSV", 0)
    _check_dims(len(rows[0]), len(rows))
    arr = np.array(rows)
    if not np.all(np.isfinite(arr)):
        raise ParseError("non-finite CSV cell", 0)
    return ScalarField(arr)


# -- dispatch ----------------------------------------------------------------

_DECODERS = {"pfm": decode_pfm, "png": decode_png, "csv": decode_csv}


def load_field(path, format: str | None = None) -> ScalarField:
    fmt = format or infer_format(path)
    with open(path, "rb") as fh:
        buf = fh.read()
    return _DECODERS[fmt](buf)


def save_field(f, path, format: str | None = None, value_range=(0.0, 1.0)) -> None:
    """Write ``f`` to ``path``.

    ``value_range`` only applies to PNG output.
    """
    f = as_field(f)  # raises InvariantError on NaN/Inf
    fmt = format or infer_format(path)
    if fmt == "pfm":
        payload = encode_pfm(f)
    elif fmt == "png":
        payload = encode_png(f, value_range)
    elif fmt == "csv":
        payload = encode_csv(f)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "wb") as fh:
        fh.write(payload)


__all__ = ["load_field", "save_field", "decode_pfm", "encode_pfm", "decode_png",
           "encode_png", "decode_csv", "encode_csv", "infer_format", "FORMATS"]
