"""File formats: PFM float maps, sRGB PNG images, `key = value` config text."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from numba import njit, prange
from PIL import Image


class SceneLoadError(Exception):
    """A scene file is missing or malformed; message names file and field."""


class SceneValidationError(Exception):
    """Scene files parsed but violate a cross-file invariant."""


# ---------------------------------------------------------------------------
# PFM
# ---------------------------------------------------------------------------

def read_pfm(path) -> np.ndarray:
    """Read a PFM file into float64, shape (H, W) for "Pf" or (H, W, 3) for "PF".

    Rows in the file run bottom-to-top (PFM convention); the returned array
    has row 0 at the top.  A negative scale field means little-endian data.
    Malformed headers raise :class:`SceneLoadError` citing the byte offset.
    """
    path = Path(path)
    raw = path.read_bytes()

    def fail(offset: int, why: str):
        raise SceneLoadError(f"{path}: corrupt PFM header at byte {offset}: {why}")

    pos = 0

    def next_token() -> tuple[bytes, int]:
        nonlocal pos
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            fail(start, "unexpected end of header")
        return raw[start:pos], start

    magic, off = next_token()
    if magic not in (b"PF", b"Pf"):
        fail(off, f"bad magic {magic!r}, expected 'PF' or 'Pf'")
    channels = 3 if magic == b"PF" else 1

    dims = []
    for name in ("width", "height"):
        tok, off = next_token()
        if not re.fullmatch(rb"\d+", tok):
            fail(off, f"bad {name} {tok!r}")
        dims.append(int(tok))
    width, height = dims
    if width <= 0 or height <= 0:
        fail(off, f"non-positive dimensions {width}x{height}")

    tok, off = next_token()
    try:
        scale = float(tok)
    except ValueError:
        fail(off, f"bad scale {tok!r}")
    if scale == 0.0:
        fail(off, "zero scale")

    pos += 1  # single whitespace byte after the scale token
    count = width * height * channels
    expected = count * 4
    if len(raw) - pos < expected:
        fail(pos, f"need {expected} data bytes, file has {len(raw) - pos}")
    dtype = "<f4" if scale < 0.0 else ">f4"
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=pos).astype(np.float64)
    data *= abs(scale) if abs(scale) != 1.0 else 1.0
    if channels == 3:
        img = data.reshape(height, width, 3)
    else:
        img = data.reshape(height, width)
    return img[::-1].copy()  # file rows are bottom-up


def write_pfm(path, data: np.ndarray) -> None:
    """Write a (H, W) or (H, W, 3) array as little-endian PFM, row 0 on top."""
    data = np.asarray(data)
    if data.ndim == 2:
        magic = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        magic = b"PF"
    else:
        raise ValueError(f"cannot write PFM of shape {data.shape}")
    h, w = data.shape[:2]
    header = magic + f"\n{w} {h}\n-1.0\n".encode()
    body = data[::-1].astype("<f4").tobytes()
    Path(path).write_bytes(header + body)


# ---------------------------------------------------------------------------
# sRGB PNG
# ---------------------------------------------------------------------------

def srgb_to_linear(c: np.ndarray) -> np.ndarray:
    """Decode sRGB-encoded values in [0, 1] to linear light."""
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(c: np.ndarray) -> np.ndarray:
    """Encode linear values to the sRGB curve; input clipped to [0, 1]."""
    c = np.clip(np.asarray(c, dtype=np.float64), 0.0, 1.0)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


@njit(cache=True, parallel=True)
def _srgb_u8_kernel(flat, out):
    # same curve and half-to-even rounding as linear_to_srgb, fused per pixel
    for i in prange(flat.shape[0]):
        x = flat[i]
        if x < 0.0:
            x = 0.0
        elif x > 1.0:
            x = 1.0
        if x <= 0.0031308:
            s = 12.92 * x
        else:
            s = 1.055 * x ** (1.0 / 2.4) - 0.055
        out[i] = np.uint8(np.rint(s * 255.0))


def linear_to_srgb_u8(img: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(img, dtype=np.float64))
    out = np.empty(arr.size, dtype=np.uint8)
    _srgb_u8_kernel(arr.ravel(), out)
    return out.reshape(arr.shape)


def read_png_linear(path) -> np.ndarray:
    """Load an 8-bit sRGB PNG as linear float RGB, shape (H, W, 3)."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except FileNotFoundError:
        raise
    except Exception as e:  # Pillow raises various decode errors
        raise SceneLoadError(f"{path}: cannot decode PNG: {e}") from e
    return srgb_to_linear(arr)


def write_png_srgb(path, linear: np.ndarray) -> None:
    """Encode linear float RGB to an 8-bit sRGB PNG."""
    Image.fromarray(linear_to_srgb_u8(linear), mode="RGB").save(path, format="PNG")


def png_bytes_srgb(linear: np.ndarray) -> bytes:
    """PNG-encode a linear float RGB image, returning the file bytes."""
    import io as _io

    buf = _io.BytesIO()
    Image.fromarray(linear_to_srgb_u8(linear), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# `key = value` config text
# ---------------------------------------------------------------------------

def read_kv_config(path) -> dict[str, str]:
    """Parse UTF-8 `key = value` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise SceneLoadError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out
