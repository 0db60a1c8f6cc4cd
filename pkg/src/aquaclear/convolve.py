"""Shared numeric kernel: multi-channel 2-D convolution, separable Gaussian
filtering, padding policies and the ReLU nonlinearity.

Convolutions use cross-correlation orientation (no kernel flip) and preserve
spatial size ("same" output). All accumulation happens in float64 with a
fixed summation order, so results are bit-deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ParameterError, ShapeError
from .image import ImageF


class PaddingMode(Enum):
    ZERO = "zero"
    REPLICATE = "replicate"


@dataclass(frozen=True, eq=False)
class Kernel2D:
    """Convolution weights indexed [c_out][c_in][k_h][k_w]."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.ndim != 4:
            raise ShapeError(f"kernel weights must be 4-D, got ndim={w.ndim}")
        if w.shape[2] % 2 == 0 or w.shape[3] % 2 == 0:
            raise ShapeError(f"kernel taps must be odd, got {w.shape[2]}x{w.shape[3]}")
        if not np.isfinite(w).all():
            raise ParameterError("kernel weights must be finite")
        object.__setattr__(self, "weights", w)

    @property
    def c_out(self) -> int:
        return self.weights.shape[0]

    @property
    def c_in(self) -> int:
        return self.weights.shape[1]

    @property
    def k_h(self) -> int:
        return self.weights.shape[2]

    @property
    def k_w(self) -> int:
        return self.weights.shape[3]


def relu(img: ImageF) -> ImageF:
    """Elementwise max(v, 0)."""
    return ImageF(np.maximum(img.data, 0.0))


# ---------------------------------------------------------------------------
# Batched convolution core (im2col + one GEMM). The public conv2d wraps a
# batch of one; the CNN training loop calls the batched forms directly.
# ---------------------------------------------------------------------------


def pad_batch(x: np.ndarray, pad_h: int, pad_w: int, mode: PaddingMode) -> np.ndarray:
    """Pad a (N, c, h, w) batch spatially."""
    if pad_h == 0 and pad_w == 0:
        return x
    spec = ((0, 0), (0, 0), (pad_h, pad_h), (pad_w, pad_w))
    if mode is PaddingMode.ZERO:
        return np.pad(x, spec, mode="constant")
    return np.pad(x, spec, mode="edge")


def im2col(xp: np.ndarray, k_h: int, k_w: int) -> np.ndarray:
    """Unfold a padded (N, c, hp, wp) batch into (N*h*w, c*k_h*k_w) columns."""
    n, c = xp.shape[:2]
    h = xp.shape[2] - k_h + 1
    w = xp.shape[3] - k_w + 1
    win = sliding_window_view(xp, (k_h, k_w), axis=(2, 3))  # (N, c, h, w, kh, kw)
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * h * w, c * k_h * k_w)


def col2im(dcols: np.ndarray, n: int, c: int, hp: int, wp: int, k_h: int, k_w: int) -> np.ndarray:
    """Transpose of im2col: scatter-add columns back onto the padded batch."""
    h = hp - k_h + 1
    w = wp - k_w + 1
    d = dcols.reshape(n, h, w, c, k_h, k_w).transpose(0, 3, 4, 5, 1, 2)
    dxp = np.zeros((n, c, hp, wp), dtype=np.float64)
    for u in range(k_h):
        for v in range(k_w):
            dxp[:, :, u : u + h, v : v + w] += d[:, :, u, v]
    return dxp


def fold_padding(dxp: np.ndarray, pad_h: int, pad_w: int, mode: PaddingMode) -> np.ndarray:
    """Collapse gradients on padded positions back onto the source pixels."""
    if pad_h == 0 and pad_w == 0:
        return dxp
    h = dxp.shape[2] - 2 * pad_h
    w = dxp.shape[3] - 2 * pad_w
    dx = dxp[:, :, pad_h : pad_h + h, pad_w : pad_w + w].copy()
    if mode is PaddingMode.ZERO:
        return dx
    top = dxp[:, :, :pad_h, pad_w : pad_w + w]
    bot = dxp[:, :, pad_h + h :, pad_w : pad_w + w]
    left = dxp[:, :, pad_h : pad_h + h, :pad_w]
    right = dxp[:, :, pad_h : pad_h + h, pad_w + w :]
    dx[:, :, 0, :] += top.sum(axis=2)
    dx[:, :, h - 1, :] += bot.sum(axis=2)
    dx[:, :, :, 0] += left.sum(axis=3)
    dx[:, :, :, w - 1] += right.sum(axis=3)
    dx[:, :, 0, 0] += dxp[:, :, :pad_h, :pad_w].sum(axis=(2, 3))
    dx[:, :, 0, w - 1] += dxp[:, :, :pad_h, pad_w + w :].sum(axis=(2, 3))
    dx[:, :, h - 1, 0] += dxp[:, :, pad_h + h :, :pad_w].sum(axis=(2, 3))
    dx[:, :, h - 1, w - 1] += dxp[:, :, pad_h + h :, pad_w + w :].sum(axis=(2, 3))
    return dx


def conv2d_batch(x: np.ndarray, weights: np.ndarray, bias: np.ndarray, mode: PaddingMode) -> np.ndarray:
    """Same-size cross-correlation of a (N, c_in, h, w) batch."""
    n, c_in, h, w = x.shape
    c_out, kc, k_h, k_w = weights.shape
    if kc != c_in:
        raise ShapeError(f"kernel expects {kc} input channels, image has {c_in}")
    if bias.shape != (c_out,):
        raise ShapeError(f"bias length {bias.shape} does not match {c_out} output channels")
    xp = pad_batch(x, k_h // 2, k_w // 2, mode)
    cols = im2col(xp, k_h, k_w)
    out = cols @ weights.reshape(c_out, -1).T + bias
    return out.reshape(n, h, w, c_out).transpose(0, 3, 1, 2)


def conv2d(img: ImageF, kernel: Kernel2D, bias: np.ndarray, pad: PaddingMode) -> ImageF:
    """Same-size multi-channel convolution with per-output-channel bias."""
    if img.channels != kernel.c_in:
        raise ShapeError(f"kernel expects {kernel.c_in} channels, image has {img.channels}")
    bias = np.ascontiguousarray(bias, dtype=np.float64).reshape(-1)
    out = conv2d_batch(img.data[np.newaxis], kernel.weights, bias, pad)
    return ImageF(out[0])


# ---------------------------------------------------------------------------
# Gaussian filtering.
# ---------------------------------------------------------------------------

# Row-block size for the windowed 1-D correlation, in float64 elements
# (bounds peak memory of the unfolded windows to ~64 MB).
_BLOCK_ELEMS = 8_000_000


def gaussian_kernel_1d(sigma: float, max_radius: int | None = None) -> np.ndarray:
    """Normalized symmetric Gaussian taps at offsets -r..r with r = ceil(3*sigma)."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    r = math.ceil(3.0 * sigma)
    if max_radius is not None:
        r = min(r, max_radius)
    offsets = np.arange(-r, r + 1, dtype=np.float64)
    taps = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return taps / taps.sum()


def _correlate_rows(rows: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Correlate each row with taps, replicate border.

    Evaluated as center + (window - center) . taps, which preserves constant
    rows bit-exactly (the deviations are exactly zero) while matching the
    plain weighted sum to ~1e-15.
    """
    r = (len(taps) - 1) // 2
    n = rows.shape[1]
    padded = np.pad(rows, ((0, 0), (r, r)), mode="edge")
    out = np.empty_like(rows)
    block = max(1, _BLOCK_ELEMS // max(1, n * len(taps)))
    for i in range(0, rows.shape[0], block):
        chunk = padded[i : i + block]
        win = sliding_window_view(chunk, len(taps), axis=1)  # (b, n, k)
        center = chunk[:, r : r + n]
        out[i : i + block] = (win - center[:, :, np.newaxis]) @ taps + center
    return out


def _pass_rows(data: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Horizontal pass over a (c, h, w) array."""
    c, h, w = data.shape
    return _correlate_rows(data.reshape(c * h, w), taps).reshape(c, h, w)


def _pass_cols(data: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Vertical pass over a (c, h, w) array."""
    swapped = np.ascontiguousarray(data.transpose(0, 2, 1))
    return _pass_rows(swapped, taps).transpose(0, 2, 1)


def filter_gaussian(img: ImageF, sigma: float) -> ImageF:
    """Separable Gaussian blur per channel with replicate border.

    The truncation radius ceil(3*sigma) is capped at max(height, width) so
    very large scales stay affordable; taps are renormalized either way.
    """
    taps = gaussian_kernel_1d(sigma, max_radius=max(img.height, img.width))
    return ImageF(np.ascontiguousarray(_pass_cols(_pass_rows(img.data, taps), taps)))
