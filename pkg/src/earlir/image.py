"""Grayscale image container and I/O: binary PGM (P5) and grayscale PNG."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from PIL import Image as PILImage

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@dataclass(frozen=True)
class GrayImage:
    """Immutable 2-D intensity grid, values in [0, 1].

    ``pixels`` is a read-only float64 array of shape (height, width),
    row-major.
    """

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.ascontiguousarray(np.asarray(self.pixels, dtype=np.float64))
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"pixels must be a non-empty 2-D array, got shape {px.shape}")
        if float(px.min()) < 0.0 or float(px.max()) > 1.0:
            raise ValueError("intensities must lie in [0, 1]")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def resize_bilinear(pixels: np.ndarray, width: int, height: int) -> np.ndarray:
    """Resample to (height, width) with bilinear interpolation, edges clamped.

    Uses the pixel-center convention: output center (i + 0.5) maps to source
    coordinate (i + 0.5) * src/dst - 0.5, clamped to the source grid.
    """
    if width < 1 or height < 1:
        raise ValueError(f"target dimensions must be positive, got {width}x{height}")
    src_h, src_w = pixels.shape
    if (src_w, src_h) == (width, height):
        return pixels.copy()

    xs = np.clip((np.arange(width) + 0.5) * (src_w / width) - 0.5, 0.0, src_w - 1.0)
    ys = np.clip((np.arange(height) + 0.5) * (src_h / height) - 0.5, 0.0, src_h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, src_w - 1)
    y1 = np.minimum(y0 + 1, src_h - 1)
    tx = (xs - x0)[None, :]
    ty = (ys - y0)[:, None]

    top = pixels[np.ix_(y0, x0)] * (1.0 - tx) + pixels[np.ix_(y0, x1)] * tx
    bottom = pixels[np.ix_(y1, x0)] * (1.0 - tx) + pixels[np.ix_(y1, x1)] * tx
    out = top * (1.0 - ty) + bottom * ty
    # convex combination of [0,1] values; clip float dust only
    return np.clip(out, 0.0, 1.0)


def _parse_pgm(data: bytes, path: Path) -> np.ndarray:
    tokens = []
    i = 2  # past the P5 magic
    n = len(data)
    while len(tokens) < 3:
        if i >= n:
            raise ValueError(f"{path}: truncated PGM header")
        c = data[i]
        if c in b" \t\r\n":
            i += 1
        elif c == ord("#"):
            while i < n and data[i] not in b"\r\n":
                i += 1
        else:
            j = i
            while j < n and data[j] not in b" \t\r\n#":
                j += 1
            tokens.append(data[i:j])
            i = j
    i += 1  # the single whitespace byte separating header and raster

    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ValueError(f"{path}: malformed PGM header") from None
    if width < 1 or height < 1:
        raise ValueError(f"{path}: bad PGM dimensions {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise ValueError(f"{path}: PGM maxval {maxval} out of range")

    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    raster = data[i : i + count * dtype.itemsize]
    if len(raster) < count * dtype.itemsize:
        raise ValueError(f"{path}: truncated PGM raster")
    raw = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return raw.astype(np.float64) / float(maxval)


def _load_png(path: Path) -> np.ndarray:
    with PILImage.open(path) as img:
        mode = img.mode
        if mode == "L":
            return np.asarray(img, dtype=np.float64) / 255.0
        if mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(img, dtype=np.float64)
            if arr.min() < 0 or arr.max() > 65535:
                raise ValueError(f"{path}: integer PNG values outside 16-bit range")
            return arr / 65535.0
        raise ValueError(f"{path}: not an 8/16-bit grayscale image (mode {mode})")


def load_image(path, target: Optional[Tuple[int, int]] = None) -> GrayImage:
    """Load a grayscale PGM (P5) or PNG and normalize intensities to [0, 1].

    Args:
        path: image file; format detected from magic bytes.
        target: optional (width, height); bilinear resample when given.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ValueError(f"cannot read image {path}: {exc}") from exc

    if data[:2] == b"P5":
        pixels = _parse_pgm(data, path)
    elif data[:8] == _PNG_MAGIC:
        pixels = _load_png(path)
    else:
        raise ValueError(f"{path}: unsupported image format (expected P5 PGM or PNG)")

    if target is not None:
        width, height = target
        pixels = resize_bilinear(pixels, width, height)
    return GrayImage(pixels=pixels)


def write_pgm(path, pixels: np.ndarray, maxval: int = 65535) -> None:
    """Quantize [0, 1] intensities and write a binary PGM (P5).

    16-bit rasters are big-endian per the PGM format.
    """
    if not 1 <= maxval <= 65535:
        raise ValueError(f"maxval {maxval} out of range")
    px = np.asarray(pixels, dtype=np.float64)
    if px.ndim != 2:
        raise ValueError("pixels must be 2-D")
    height, width = px.shape
    raw = np.clip(np.rint(px * maxval), 0, maxval)
    body = raw.astype("u1" if maxval <= 255 else ">u2").tobytes()
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + body)
