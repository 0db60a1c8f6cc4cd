"""Multi-scale retinex defogging and illumination correction.

Each channel is decomposed against Gaussian illumination estimates at several
scales; the averaged log-ratios live in an unbounded log domain and are
mapped back to [0, 1] by a per-channel percentile stretch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convolve import filter_gaussian
from .errors import ParameterError
from .image import ImageF

# Log-domain image, same planar layout as ImageF but unbounded values.
MsrRaw = ImageF


@dataclass(frozen=True)
class MsrConfig:
    scales: tuple[float, ...] = (15.0, 80.0, 250.0)
    epsilon: float = 1.0 / 255.0
    low_percentile: float = 1.0
    high_percentile: float = 99.0

    def __post_init__(self):
        if len(self.scales) == 0:
            raise ParameterError("scales must be non-empty")
        if any(s <= 0 for s in self.scales):
            raise ParameterError(f"scales must be positive, got {self.scales}")
        if self.epsilon <= 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not (0.0 <= self.low_percentile < self.high_percentile <= 100.0):
            raise ParameterError(
                f"percentiles must satisfy 0 <= low < high <= 100, got "
                f"{self.low_percentile}/{self.high_percentile}"
            )
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))


def illumination_estimate(img: ImageF, sigma: float) -> ImageF:
    """Per-channel Gaussian smoothing standing in for the scene lighting."""
    return filter_gaussian(img, sigma)


def msr_raw(img: ImageF, config: MsrConfig = MsrConfig()) -> MsrRaw:
    """Average over scales of log(I + eps) - log(blur(I) + eps), per channel.

    Uniform images come out exactly zero: the illumination estimate preserves
    constants bit-exactly, so the two logarithms cancel.
    """
    if (img.data < 0).any():
        raise ParameterError("msr_raw requires nonnegative samples")
    eps = config.epsilon
    log_img = np.log(img.data + eps)
    acc = np.zeros_like(img.data)
    for sigma in config.scales:
        acc += log_img - np.log(illumination_estimate(img, sigma).data + eps)
    return ImageF(acc / len(config.scales))


def msr_normalize(raw: MsrRaw, config: MsrConfig = MsrConfig()) -> ImageF:
    """Affinely map each channel's [p_low, p_high] percentile range onto [0, 1].

    A channel whose percentile range collapses (constant channel) maps to 0.5.
    """
    out = np.empty_like(raw.data)
    for c in range(raw.channels):
        chan = raw.data[c]
        lo = np.percentile(chan, config.low_percentile)
        hi = np.percentile(chan, config.high_percentile)
        if hi > lo:
            out[c] = np.clip((chan - lo) / (hi - lo), 0.0, 1.0)
        else:
            out[c] = 0.5
    return ImageF(out)


def msr_enhance(img: ImageF, config: MsrConfig = MsrConfig()) -> ImageF:
    """Full retinex stage: raw log-ratio decomposition plus percentile stretch."""
    return msr_normalize(msr_raw(img, config), config)
