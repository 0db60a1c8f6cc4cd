"""Core image representation, pixel-format conversion, file I/O and resampling.

Images are carried in planar channel-major layout: an array of shape
``(channels, height, width)``. Float images use float64 samples with a
nominal range of [0, 1]; 8-bit images appear only at the file boundary.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import FormatError, NumericError, ShapeError

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

# Rec. 601 luma weights.
_LUMA_R, _LUMA_G, _LUMA_B = 0.299, 0.587, 0.114


def _check_planar(data: np.ndarray) -> None:
    if data.ndim != 3:
        raise ShapeError(f"expected planar (channels, height, width) array, got ndim={data.ndim}")
    c, h, w = data.shape
    if c not in (1, 3):
        raise ShapeError(f"channels must be 1 or 3, got {c}")
    if h < 1 or w < 1:
        raise ShapeError(f"degenerate image shape {data.shape}")


@dataclass(frozen=True, eq=False)
class ImageF:
    """Floating-point image, planar (channels, height, width), float64."""

    data: np.ndarray

    def __post_init__(self):
        _check_planar(self.data)
        if self.data.dtype != np.float64:
            object.__setattr__(self, "data", np.ascontiguousarray(self.data, dtype=np.float64))
        else:
            object.__setattr__(self, "data", np.ascontiguousarray(self.data))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class ImageU8:
    """8-bit image, planar (channels, height, width), uint8."""

    data: np.ndarray

    def __post_init__(self):
        _check_planar(self.data)
        if self.data.dtype != np.uint8:
            raise ShapeError(f"ImageU8 requires uint8 samples, got {self.data.dtype}")
        object.__setattr__(self, "data", np.ascontiguousarray(self.data))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def to_float(img: ImageU8) -> ImageF:
    """Map 8-bit samples to [0, 1]: v -> v / 255."""
    return ImageF(img.data.astype(np.float64) / 255.0)


def to_u8(img: ImageF) -> ImageU8:
    """Quantize to 8 bits: v -> round(clamp(v, 0, 1) * 255), half away from zero."""
    if np.isnan(img.data).any():
        raise NumericError("NaN sample in image")
    scaled = np.clip(img.data, 0.0, 1.0) * 255.0
    # np.round is half-to-even; values are nonnegative here so floor(x + 0.5)
    # is exactly half-away-from-zero.
    return ImageU8(np.floor(scaled + 0.5).astype(np.uint8))


def rgb_to_luma(img: ImageF) -> ImageF:
    """Collapse RGB to a single luma channel, Y = 0.299 R + 0.587 G + 0.114 B."""
    if img.channels != 3:
        raise ShapeError(f"rgb_to_luma requires 3 channels, got {img.channels}")
    r, g, b = img.data
    return ImageF((_LUMA_R * r + _LUMA_G * g + _LUMA_B * b)[np.newaxis, :, :])


# ---------------------------------------------------------------------------
# File I/O: PNG (8-bit gray/RGB) via Pillow, binary PPM (P6) / PGM (P5) by hand.
# ---------------------------------------------------------------------------


def _read_pnm(raw: bytes, path: str) -> ImageU8:
    magic = raw[:2]
    channels = 3 if magic == b"P6" else 1
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if pos == start:
            raise FormatError(f"{path}: truncated PNM header")
        fields.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise FormatError(f"{path}: non-numeric PNM header field") from None
    if maxval != 255:
        raise FormatError(f"{path}: PNM maxval {maxval} unsupported (only 255)")
    if width < 1 or height < 1:
        raise FormatError(f"{path}: bad PNM dimensions {width}x{height}")
    n = height * width * channels
    pixels = raw[pos : pos + n]
    if len(pixels) != n:
        raise FormatError(f"{path}: PNM pixel data truncated ({len(pixels)} of {n} bytes)")
    flat = np.frombuffer(pixels, dtype=np.uint8)
    if channels == 1:
        planar = flat.reshape(1, height, width)
    else:
        planar = flat.reshape(height, width, 3).transpose(2, 0, 1)
    return ImageU8(planar.copy())


def _read_png(raw: bytes, path: str) -> ImageU8:
    try:
        pil = PILImage.open(io.BytesIO(raw))
        pil.load()
    except UnidentifiedImageError:
        raise FormatError(f"{path}: undecodable PNG") from None
    if pil.mode in ("I", "I;16", "I;16B", "I;16L"):
        raise FormatError(f"{path}: 16-bit PNG unsupported")
    if pil.mode in ("LA",):
        pil = pil.convert("L")
    elif pil.mode in ("RGBA", "P"):
        pil = pil.convert("RGB")
    elif pil.mode not in ("L", "RGB"):
        raise FormatError(f"{path}: PNG mode {pil.mode} unsupported")
    arr = np.asarray(pil, dtype=np.uint8)
    if arr.ndim == 2:
        return ImageU8(arr[np.newaxis, :, :].copy())
    return ImageU8(arr.transpose(2, 0, 1).copy())


def load_image(path) -> ImageU8:
    """Decode a PNG, binary PPM (P6) or binary PGM (P5) file.

    Alpha channels are dropped; unsupported formats raise FormatError.
    """
    path = str(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] in (b"P5", b"P6"):
        return _read_pnm(raw, path)
    if raw[: len(_PNG_MAGIC)] == _PNG_MAGIC:
        return _read_png(raw, path)
    head = raw[:8]
    raise FormatError(f"{path}: unsupported image format (header {head!r}); expected PNG, P6 PPM or P5 PGM")


def save_image(img: ImageU8, path) -> None:
    """Write PNG / PPM / PGM by file extension. Round-trips bit-exactly."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        if img.channels != 3:
            raise FormatError(f"{path}: PPM requires 3 channels, image has {img.channels}")
        body = img.data.transpose(1, 2, 0).tobytes()
        path.write_bytes(f"P6 {img.width} {img.height} 255\n".encode("ascii") + body)
    elif suffix == ".pgm":
        if img.channels != 1:
            raise FormatError(f"{path}: PGM requires 1 channel, image has {img.channels}")
        path.write_bytes(f"P5 {img.width} {img.height} 255\n".encode("ascii") + img.data.tobytes())
    elif suffix == ".png":
        if img.channels == 1:
            pil = PILImage.fromarray(img.data[0], mode="L")
        else:
            pil = PILImage.fromarray(np.ascontiguousarray(img.data.transpose(1, 2, 0)), mode="RGB")
        pil.save(path, format="PNG")
    else:
        raise FormatError(f"{path}: unsupported output extension {suffix!r} (use .png, .ppm or .pgm)")


# ---------------------------------------------------------------------------
# Resampling and geometric ops.
# ---------------------------------------------------------------------------


def bicubic_weights(t: float) -> np.ndarray:
    """Catmull-Rom (a = -0.5) weights for the four taps around fractional offset t."""
    return np.array([_cubic(1.0 + t), _cubic(t), _cubic(1.0 - t), _cubic(2.0 - t)])


def _cubic(x: float) -> float:
    a = -0.5
    x = abs(x)
    if x <= 1.0:
        return (a + 2.0) * x**3 - (a + 3.0) * x**2 + 1.0
    if x < 2.0:
        return a * (x**3 - 5.0 * x**2 + 8.0 * x - 4.0)
    return 0.0


def _resample_axis(data: np.ndarray, out_n: int) -> np.ndarray:
    """Bicubic resample along the last axis, replicate border."""
    in_n = data.shape[-1]
    x = np.arange(out_n, dtype=np.float64)
    src = (x + 0.5) * (in_n / out_n) - 0.5
    base = np.floor(src).astype(np.int64)
    t = src - base
    a = -0.5
    # Catmull-Rom weights for taps at base-1 .. base+2, vectorized over outputs.
    t2, t3 = t * t, t * t * t
    w0 = a * (t3 - 2.0 * t2 + t)
    w1 = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0
    w2 = -(a + 2.0) * t3 + (2.0 * a + 3.0) * t2 - a * t
    w3 = a * (t2 - t3)
    out = np.zeros(data.shape[:-1] + (out_n,), dtype=np.float64)
    for offset, w in zip((-1, 0, 1, 2), (w0, w1, w2, w3)):
        idx = np.clip(base + offset, 0, in_n - 1)
        out += data[..., idx] * w
    return out


def resize_bicubic(img: ImageF, out_h: int, out_w: int) -> ImageF:
    """Catmull-Rom bicubic resize with replicate border; output clamped to [0, 1]."""
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"target size {out_h}x{out_w} must be positive")
    if out_h == img.height and out_w == img.width:
        return ImageF(np.clip(img.data, 0.0, 1.0))
    rows = _resample_axis(img.data, out_w)
    cols = _resample_axis(rows.transpose(0, 2, 1), out_h).transpose(0, 2, 1)
    return ImageF(np.clip(cols, 0.0, 1.0))


def flip_h(img: ImageF) -> ImageF:
    """Mirror left-right."""
    return ImageF(img.data[:, :, ::-1].copy())


def flip_v(img: ImageF) -> ImageF:
    """Mirror top-bottom."""
    return ImageF(img.data[:, ::-1, :].copy())


def rotate90(img: ImageF, quarter_turns: int) -> ImageF:
    """Rotate counter-clockwise by quarter_turns * 90 degrees."""
    return ImageF(np.rot90(img.data, k=quarter_turns % 4, axes=(1, 2)).copy())
