"""Comparison methods: global histogram equalization, CLAHE and
single-scale retinex, all mapping [0,1] images to [0,1] images.

Color images are equalized in the luma domain and the per-pixel luma gain is
applied to RGB, which avoids the hue shifts of per-channel equalization;
``per_channel=True`` reproduces that failure mode for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .image import ImageF, rgb_to_luma
from .retinex import MsrConfig, msr_enhance

_BINS = 256
_LUMA_GUARD = 1e-12


@dataclass(frozen=True)
class ClaheConfig:
    tiles_x: int = 8
    tiles_y: int = 8
    clip_limit: float = 2.0  # multiple of the uniform bin height
    bins: int = 256

    def __post_init__(self):
        if self.tiles_x < 1 or self.tiles_y < 1:
            raise ParameterError(f"tile counts must be >= 1, got {self.tiles_x}x{self.tiles_y}")
        if self.clip_limit < 1:
            raise ParameterError(f"clip_limit must be >= 1, got {self.clip_limit}")
        if self.bins < 2:
            raise ParameterError(f"bins must be >= 2, got {self.bins}")


def _bin_index(plane: np.ndarray, bins: int) -> np.ndarray:
    # Bins partition [0,1]; the final bin is right-inclusive so v == 1 lands in it.
    return np.minimum((plane * bins).astype(np.int64), bins - 1)


def _equalize_lut(hist: np.ndarray, total: float) -> np.ndarray | None:
    """Classic CDF remap table; None marks the degenerate single-level case."""
    cdf = np.cumsum(hist)
    occupied = np.nonzero(hist)[0]
    if len(occupied) == 0:
        return None
    cdf_min = cdf[occupied[0]]
    if cdf_min >= total:
        return None
    return (cdf - cdf_min) / (total - cdf_min)


def _equalize_plane(plane: np.ndarray) -> np.ndarray:
    idx = _bin_index(plane, _BINS)
    hist = np.bincount(idx.ravel(), minlength=_BINS).astype(np.float64)
    lut = _equalize_lut(hist, plane.size)
    if lut is None:
        return plane.copy()
    return lut[idx]


def _apply_luma_gain(img: ImageF, luma: np.ndarray, new_luma: np.ndarray) -> ImageF:
    gain = np.where(luma > _LUMA_GUARD, new_luma / np.maximum(luma, _LUMA_GUARD), 1.0)
    return ImageF(np.clip(img.data * gain[np.newaxis, :, :], 0.0, 1.0))


def hist_equalize(img: ImageF, per_channel: bool = False) -> ImageF:
    """Global histogram equalization; constant images pass through unchanged."""
    if img.channels == 1:
        return ImageF(_equalize_plane(img.data[0])[np.newaxis])
    if per_channel:
        return ImageF(np.stack([_equalize_plane(img.data[c]) for c in range(3)]))
    luma = rgb_to_luma(img).data[0]
    return _apply_luma_gain(img, luma, _equalize_plane(luma))


def _tile_edges(extent: int, tiles: int) -> np.ndarray:
    return np.array([(i * extent) // tiles for i in range(tiles + 1)], dtype=np.int64)


def _clahe_plane(plane: np.ndarray, config: ClaheConfig) -> np.ndarray:
    h, w = plane.shape
    ty, tx, bins = config.tiles_y, config.tiles_x, config.bins
    if h < ty or w < tx:
        raise ParameterError(f"image {h}x{w} smaller than tile grid {ty}x{tx}")
    idx = _bin_index(plane, bins)
    ye = _tile_edges(h, ty)
    xe = _tile_edges(w, tx)

    luts = np.empty((ty, tx, bins), dtype=np.float64)
    for i in range(ty):
        for j in range(tx):
            tile_idx = idx[ye[i] : ye[i + 1], xe[j] : xe[j + 1]]
            hist = np.bincount(tile_idx.ravel(), minlength=bins).astype(np.float64)
            npix = float(tile_idx.size)
            limit = config.clip_limit * npix / bins
            clipped = np.minimum(hist, limit)
            # Single uniform redistribution pass; bins pushed back above the
            # limit are left as-is.
            clipped += (npix - clipped.sum()) / bins
            lut = _equalize_lut(clipped, npix)
            luts[i, j] = np.arange(bins) / (bins - 1) if lut is None else lut

    cy = (ye[:-1] + ye[1:] - 1) / 2.0
    cx = (xe[:-1] + xe[1:] - 1) / 2.0
    i0, fy = _blend_coords(np.arange(h, dtype=np.float64), cy)
    j0, fx = _blend_coords(np.arange(w, dtype=np.float64), cx)
    i1 = np.minimum(i0 + 1, ty - 1)
    j1 = np.minimum(j0 + 1, tx - 1)

    fy = fy[:, np.newaxis]
    fx = fx[np.newaxis, :]
    i0, i1 = i0[:, np.newaxis], i1[:, np.newaxis]
    j0, j1 = j0[np.newaxis, :], j1[np.newaxis, :]
    out = (1 - fy) * (1 - fx) * luts[i0, j0, idx]
    out += (1 - fy) * fx * luts[i0, j1, idx]
    out += fy * (1 - fx) * luts[i1, j0, idx]
    out += fy * fx * luts[i1, j1, idx]
    return out


def _blend_coords(coords: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lower tile index and interpolation fraction per pixel coordinate."""
    i0 = np.clip(np.searchsorted(centers, coords, side="right") - 1, 0, len(centers) - 1)
    i1 = np.minimum(i0 + 1, len(centers) - 1)
    span = centers[i1] - centers[i0]
    frac = np.zeros_like(coords)
    nonflat = span > 0
    frac[nonflat] = np.clip((coords[nonflat] - centers[i0][nonflat]) / span[nonflat], 0.0, 1.0)
    return i0, frac


def _single_level(plane: np.ndarray) -> bool:
    hist = np.bincount(_bin_index(plane, _BINS).ravel(), minlength=_BINS)
    return np.count_nonzero(hist) <= 1


def clahe(img: ImageF, config: ClaheConfig = ClaheConfig()) -> ImageF:
    """Contrast-limited adaptive histogram equalization with bilinear tile blending."""
    if img.channels == 1:
        plane = img.data[0]
        if _single_level(plane):
            return ImageF(plane.copy()[np.newaxis])  # constant image passes through
        return ImageF(_clahe_plane(plane, config)[np.newaxis])
    luma = rgb_to_luma(img).data[0]
    if _single_level(luma):
        return ImageF(img.data.copy())
    return _apply_luma_gain(img, luma, _clahe_plane(luma, config))


def ssr(img: ImageF, sigma: float = 80.0) -> ImageF:
    """Single-scale retinex: the multi-scale path with one scale."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    return msr_enhance(img, MsrConfig(scales=(sigma,)))
