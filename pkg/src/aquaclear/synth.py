"""Procedural test scenes.

Colorful deterministic images with smooth gradients, hard-edged shapes and a
little sinusoidal texture: enough structure for resolution metrics and patch
training without shipping binary fixtures.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .image import ImageF


def synth_scene(height: int, width: int, seed: int) -> ImageF:
    """One deterministic RGB scene; the same arguments always give the same image."""
    if height < 1 or width < 1:
        raise ParameterError(f"scene dimensions must be >= 1, got {height}x{width}")
    rng = np.random.default_rng(seed)
    ys = np.linspace(0.0, 1.0, height)[:, np.newaxis]
    xs = np.linspace(0.0, 1.0, width)[np.newaxis, :]

    lo = rng.uniform(0.15, 0.45, size=3)
    hi = rng.uniform(0.55, 0.9, size=3)
    ramp = (ys + xs) / 2.0
    img = lo[:, np.newaxis, np.newaxis] + (hi - lo)[:, np.newaxis, np.newaxis] * ramp

    freq = rng.uniform(2.0, 6.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    weight = rng.uniform(0.02, 0.08, size=3)
    img += weight[:, np.newaxis, np.newaxis] * np.sin(2.0 * np.pi * freq * xs + phase)

    for _ in range(6):
        cy, cx = rng.uniform(0.1, 0.9, size=2)
        radius = rng.uniform(0.05, 0.2)
        color = rng.uniform(0.05, 0.95, size=3)
        mask = (ys - cy) ** 2 + (xs - cx) ** 2 < radius**2
        img[:, mask] = color[:, np.newaxis]

    for _ in range(3):
        y0, y1 = np.sort(rng.uniform(0.0, 1.0, size=2))
        x0, x1 = np.sort(rng.uniform(0.0, 1.0, size=2))
        color = rng.uniform(0.05, 0.95, size=3)
        rows = slice(int(y0 * height), max(int(y1 * height), int(y0 * height) + 1))
        cols = slice(int(x0 * width), max(int(x1 * width), int(x0 * width) + 1))
        img[:, rows, cols] = 0.65 * color[:, np.newaxis, np.newaxis] + 0.35 * img[:, rows, cols]

    return ImageF(np.clip(img, 0.0, 1.0))


def synth_set(count: int, height: int, width: int, seed: int) -> list[ImageF]:
    """`count` distinct scenes seeded consecutively from `seed`."""
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    return [synth_scene(height, width, seed + i) for i in range(count)]
