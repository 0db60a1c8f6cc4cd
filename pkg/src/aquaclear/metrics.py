"""Quality metrics: PSNR, SSIM (global and windowed) and colorfulness.

All statistics are population (1/n) moments computed in float64; PSNR and
SSIM operate in the [0, 1] sample domain (dynamic range 1.0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ParameterError, ShapeError
from .image import ImageF, rgb_to_luma

CSV_HEADER = "method,image,psnr_db,ssim,colorfulness,seconds"

# Colorfulness is computed in [0,1] then scaled so magnitudes are comparable
# to the usual 8-bit-domain statistic.
_CM_SCALE = 255.0

_SSIM_WINDOW_TAPS = 11
_SSIM_WINDOW_SIGMA = 1.5


@dataclass(frozen=True)
class SsimParams:
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0
    window: str = "gaussian"  # "gaussian" (11x11, sigma 1.5) or "global"

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0:
            raise ParameterError(f"K1/K2 must be positive, got {self.k1}/{self.k2}")
        if self.window not in ("gaussian", "global"):
            raise ParameterError(f"window must be 'gaussian' or 'global', got {self.window!r}")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


@dataclass(frozen=True)
class MetricsReport:
    psnr_db: float  # math.inf marks a zero-error pair
    ssim: float
    colorfulness: float
    elapsed_seconds: float


def _require_same_shape(a: ImageF, b: ImageF) -> None:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"image shapes differ: {a.data.shape} vs {b.data.shape}")


def psnr(a: ImageF, b: ImageF, max_value: float = 1.0) -> float:
    """Peak signal-to-noise ratio, 10*log10(MAX^2 / MSE), in dB."""
    _require_same_shape(a, b)
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / mse)


def _luma_plane(img: ImageF) -> np.ndarray:
    if img.channels == 3:
        return rgb_to_luma(img).data[0]
    return img.data[0]


def _gaussian_window_taps() -> np.ndarray:
    r = (_SSIM_WINDOW_TAPS - 1) // 2
    offsets = np.arange(-r, r + 1, dtype=np.float64)
    taps = np.exp(-(offsets**2) / (2.0 * _SSIM_WINDOW_SIGMA**2))
    return taps / taps.sum()


def _valid_filter(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation (full windows only)."""
    horiz = sliding_window_view(plane, len(taps), axis=1) @ taps  # (h, w-k+1)
    return sliding_window_view(horiz, len(taps), axis=0) @ taps  # (h-k+1, w-k+1)


def ssim(a: ImageF, b: ImageF, params: SsimParams = SsimParams()) -> float:
    """Structural similarity on the luma plane.

    Global mode uses whole-image moments; windowed mode averages the local
    statistic over Gaussian-weighted 11x11 neighborhoods (valid region only).
    """
    _require_same_shape(a, b)
    x = _luma_plane(a)
    y = _luma_plane(b)
    c1, c2 = params.c1, params.c2
    if params.window == "global":
        mu_x, mu_y = x.mean(), y.mean()
        var_x = (x * x).mean() - mu_x * mu_x
        var_y = (y * y).mean() - mu_y * mu_y
        cov = (x * y).mean() - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        return float(num / den)
    if x.shape[0] < _SSIM_WINDOW_TAPS or x.shape[1] < _SSIM_WINDOW_TAPS:
        raise ShapeError(
            f"windowed SSIM needs images at least {_SSIM_WINDOW_TAPS}x{_SSIM_WINDOW_TAPS}, got {x.shape}"
        )
    taps = _gaussian_window_taps()
    mu_x = _valid_filter(x, taps)
    mu_y = _valid_filter(y, taps)
    var_x = _valid_filter(x * x, taps) - mu_x * mu_x
    var_y = _valid_filter(y * y, taps) - mu_y * mu_y
    cov = _valid_filter(x * y, taps) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def colorfulness(img: ImageF) -> float:
    """Hasler-Suesstrunk colorfulness of the opponent channels rg and yb."""
    if img.channels != 3:
        raise ShapeError(f"colorfulness requires 3 channels, got {img.channels}")
    r, g, b = img.data
    rg = r - g
    yb = 0.5 * (r + g) - b
    std_term = math.sqrt(float(rg.var() + yb.var()))
    mean_term = math.sqrt(float(rg.mean() ** 2 + yb.mean() ** 2))
    return (std_term + 0.3 * mean_term) * _CM_SCALE


def evaluate_pair(
    reference: ImageF,
    candidate: ImageF,
    params: SsimParams = SsimParams(),
    elapsed_seconds: float = 0.0,
) -> MetricsReport:
    """Bundle PSNR/SSIM against the reference plus the candidate's colorfulness."""
    return MetricsReport(
        psnr_db=psnr(reference, candidate),
        ssim=ssim(reference, candidate, params),
        colorfulness=colorfulness(candidate),
        elapsed_seconds=elapsed_seconds,
    )


def _fmt(value: float) -> str:
    if math.isinf(value):
        return "inf"
    return f"{value:.6f}"


def csv_row(method: str, image: str, report: MetricsReport) -> str:
    """One per-image CSV line in CSV_HEADER column order."""
    return (
        f"{method},{image},{_fmt(report.psnr_db)},{_fmt(report.ssim)},"
        f"{_fmt(report.colorfulness)},{_fmt(report.elapsed_seconds)}"
    )
