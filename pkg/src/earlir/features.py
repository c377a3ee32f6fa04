"""Feature extractors: raw intensity, uniform LBP, LPQ, and HOG descriptors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .image import GrayImage

# offsets/responses closer than this to an exact integer/zero are snapped,
# so ties (neighbor == center, flat spectrum) code deterministically
_SNAP_EPS = 1e-9


@dataclass(frozen=True)
class FeatureVector:
    """Method-tagged real vector produced by an extractor or projection."""

    method: str
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError(f"values must be a non-empty 1-D vector, got shape {vals.shape}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class GridSpec:
    """Block layout partitioning the full image extent."""

    blocks_x: int = 4
    blocks_y: int = 4

    def __post_init__(self) -> None:
        if self.blocks_x < 1 or self.blocks_y < 1:
            raise ValueError("grid blocks must be >= 1 on both axes")


def intensity_vector(img: GrayImage) -> FeatureVector:
    """Row-major flattening of the intensity grid."""
    return FeatureVector(method="intensity", values=img.pixels.ravel())


# ---------------------------------------------------------------------------
# uniform LBP


@lru_cache(maxsize=8)
def ulbp_code_table(P: int) -> np.ndarray:
    """Map each P-bit code to its histogram bin.

    Codes with at most 2 circular 0/1 transitions are uniform and get their
    own bin in ascending code order; all others share the final bin. Bin
    count is P*(P-1) + 3 (uniform patterns plus the shared bin).
    """
    codes = np.arange(2**P, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(P)) & 1
    transitions = (bits != np.roll(bits, -1, axis=1)).sum(axis=1)
    uniform = transitions <= 2
    table = np.full(2**P, int(uniform.sum()), dtype=np.int64)
    table[uniform] = np.arange(int(uniform.sum()))
    return table


def _sample_at_offset(px: np.ndarray, margin: int, dy: float, dx: float) -> np.ndarray:
    """Bilinear sample at a fixed offset for every interior pixel."""
    height, width = px.shape
    y0, x0 = math.floor(dy), math.floor(dx)
    ty, tx = dy - y0, dx - x0
    if ty < _SNAP_EPS:
        ty = 0.0
    elif ty > 1.0 - _SNAP_EPS:
        y0, ty = y0 + 1, 0.0
    if tx < _SNAP_EPS:
        tx = 0.0
    elif tx > 1.0 - _SNAP_EPS:
        x0, tx = x0 + 1, 0.0

    out = np.zeros((height - 2 * margin, width - 2 * margin))
    for oy, wy in ((y0, 1.0 - ty), (y0 + 1, ty)):
        if wy == 0.0:
            continue
        for ox, wx in ((x0, 1.0 - tx), (x0 + 1, tx)):
            if wx == 0.0:
                continue
            out += (wy * wx) * px[margin + oy : height - margin + oy,
                                  margin + ox : width - margin + ox]
    return out


def _block_concat(
    codes: np.ndarray,
    margin_y: int,
    margin_x: int,
    shape: tuple,
    grid: GridSpec,
    nbins: int,
    require_full_grid: bool,
) -> np.ndarray:
    """Concatenate per-block histograms of interior codes, blocks row-major."""
    height, width = shape
    rows, cols = codes.shape
    ys = margin_y + np.arange(rows)
    xs = margin_x + np.arange(cols)
    by = (ys * grid.blocks_y) // height
    bx = (xs * grid.blocks_x) // width
    block = by[:, None] * grid.blocks_x + bx[None, :]
    n_blocks = grid.blocks_y * grid.blocks_x
    counts = np.bincount((block * nbins + codes).ravel(), minlength=n_blocks * nbins)
    if require_full_grid and (counts.reshape(n_blocks, nbins).sum(axis=1) == 0).any():
        raise ValueError("grid block too small to contain any interior pixel")
    return counts.astype(np.float64)


def ulbp_histogram(img: GrayImage, P: int = 8, R: float = 2.0, grid: GridSpec = GridSpec()) -> FeatureVector:
    """Uniform LBP histogram, concatenated over grid blocks (raw counts).

    Neighbors are sampled at angles 2*pi*p/P on the radius-R circle starting
    east and going counter-clockwise in image coordinates, bilinearly
    interpolated; a neighbor >= center sets its bit (ties count as 1).
    """
    if P not in (8, 16):
        raise ValueError(f"P must be 8 or 16, got {P}")
    if R <= 0:
        raise ValueError(f"R must be positive, got {R}")
    px = img.pixels
    margin = math.ceil(R)
    if img.height <= 2 * margin or img.width <= 2 * margin:
        raise ValueError(f"image {img.width}x{img.height} too small for radius {R}")

    center = px[margin : img.height - margin, margin : img.width - margin]
    code = np.zeros(center.shape, dtype=np.int64)
    for p in range(P):
        angle = 2.0 * np.pi * p / P
        neighbor = _sample_at_offset(px, margin, -R * math.sin(angle), R * math.cos(angle))
        code |= (neighbor >= center).astype(np.int64) << p

    table = ulbp_code_table(P)
    nbins = int(table.max()) + 1
    counts = _block_concat(table[code], margin, margin, px.shape, grid, nbins,
                           require_full_grid=True)
    radius = int(R) if float(R).is_integer() else R
    return FeatureVector(method=f"ulbp_{P}_{radius}", values=counts)


# ---------------------------------------------------------------------------
# LPQ


def _correlate1d_valid(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    win = kernel.shape[0]
    n = arr.shape[axis] - win + 1
    out = np.zeros(
        (n, arr.shape[1]) if axis == 0 else (arr.shape[0], n),
        dtype=np.result_type(arr.dtype, kernel.dtype),
    )
    for t in range(win):
        sl = arr[t : t + n, :] if axis == 0 else arr[:, t : t + n]
        out += kernel[t] * sl
    return out


def lpq_histogram(img: GrayImage, win: int = 7, grid: GridSpec = GridSpec()) -> FeatureVector:
    """Local phase quantization histogram over grid blocks (raw counts).

    Windowed Fourier coefficients at the four lowest non-zero frequencies
    (a, 0), (0, a), (a, a), (a, -a) with a = 1/win are computed by separable
    correlation over valid pixels; the 8-bit code packs the signs of the four
    real then four imaginary parts, real (a, 0) as the least significant bit,
    with sign(0) = 1.
    """
    if win < 3 or win % 2 == 0:
        raise ValueError(f"win must be odd and >= 3, got {win}")
    if img.height <= win or img.width <= win:
        raise ValueError(f"window {win} larger than image {img.width}x{img.height}")

    k = np.arange(-(win // 2), win // 2 + 1)
    w0 = np.ones(win, dtype=np.complex128)
    w1 = np.exp(-2j * np.pi * k / win)
    w2 = np.conj(w1)

    px = img.pixels.astype(np.complex128)
    rows_w0 = _correlate1d_valid(px, w0, axis=0)
    rows_w1 = _correlate1d_valid(px, w1, axis=0)
    rows_w2 = _correlate1d_valid(px, w2, axis=0)
    freq = (
        _correlate1d_valid(rows_w0, w1, axis=1),  # u1 = (a, 0)
        _correlate1d_valid(rows_w1, w0, axis=1),  # u2 = (0, a)
        _correlate1d_valid(rows_w1, w1, axis=1),  # u3 = (a, a)
        _correlate1d_valid(rows_w2, w1, axis=1),  # u4 = (a, -a)
    )

    code = np.zeros(freq[0].shape, dtype=np.int64)
    for bit, part in enumerate([f.real for f in freq] + [f.imag for f in freq]):
        code |= (part >= -_SNAP_EPS).astype(np.int64) << bit

    margin = win // 2
    counts = _block_concat(code, margin, margin, px.shape, grid, nbins=256,
                           require_full_grid=False)
    return FeatureVector(method="lpq", values=counts)


# ---------------------------------------------------------------------------
# HOG


def hog_descriptor(img: GrayImage, cell: int = 10, block_cells: int = 2, bins: int = 9) -> FeatureVector:
    """HOG with L2-hys block normalization, blocks at one-cell stride.

    Gradients use central differences with replicated edges; unsigned
    orientations in [0, 180) vote into per-cell histograms with linear
    interpolation between the two nearest bin centers (centers at multiples
    of 180/bins, circular). Only full cells contribute.
    """
    if cell < 2:
        raise ValueError(f"cell must be >= 2, got {cell}")
    if block_cells < 1:
        raise ValueError(f"block_cells must be >= 1, got {block_cells}")
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    n_cx, n_cy = img.width // cell, img.height // cell
    if n_cx < block_cells or n_cy < block_cells:
        raise ValueError(
            f"image {img.width}x{img.height} yields {n_cx}x{n_cy} cells, "
            f"fewer than block_cells={block_cells}"
        )

    padded = np.pad(img.pixels, 1, mode="edge")
    gx = padded[1:-1, 2:] - padded[1:-1, :-2]
    gy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    mag = np.hypot(gx, gy)
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0

    bin_width = 180.0 / bins
    pos = ang / bin_width
    lower = np.floor(pos).astype(np.int64) % bins
    frac = pos - np.floor(pos)
    upper = (lower + 1) % bins

    # restrict to full cells
    h_used, w_used = n_cy * cell, n_cx * cell
    ys, xs = np.arange(h_used), np.arange(w_used)
    cell_idx = (ys[:, None] // cell) * n_cx + (xs[None, :] // cell)
    region = np.s_[:h_used, :w_used]

    flat_lower = (cell_idx * bins + lower[region]).ravel()
    flat_upper = (cell_idx * bins + upper[region]).ravel()
    n_cells = n_cy * n_cx
    hist = np.bincount(flat_lower, weights=(mag[region] * (1.0 - frac[region])).ravel(),
                       minlength=n_cells * bins)
    hist += np.bincount(flat_upper, weights=(mag[region] * frac[region]).ravel(),
                        minlength=n_cells * bins)
    cells = hist.reshape(n_cy, n_cx, bins)

    blocks = []
    for by in range(n_cy - block_cells + 1):
        for bx in range(n_cx - block_cells + 1):
            v = cells[by : by + block_cells, bx : bx + block_cells].ravel().copy()
            norm = float(np.linalg.norm(v))
            if norm > 0.0:
                v /= norm
                np.minimum(v, 0.2, out=v)
                norm = float(np.linalg.norm(v))
                if norm > 0.0:
                    v /= norm
            blocks.append(v)
    return FeatureVector(method="hog", values=np.concatenate(blocks))
