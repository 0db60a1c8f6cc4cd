"""Synthetic degradation and training-data plumbing.

The degradation model is the closed-form water/fog chain

    x -> attenuation_c * x            (wavelength-dependent absorption)
      -> x * t + veil_c * (1 - t)     (scattering veil, transmission t)
      -> Gaussian blur                (forward scatter)
      -> box-prefiltered subsampling  (resolution loss)

applied to a ground-truth crop whose dimensions divide the downsample
factor. It is deliberately noise-free so every output is reproducible
bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .convolve import filter_gaussian
from .errors import FormatError, ParameterError, ShapeError
from .image import (
    ImageF,
    flip_h,
    load_image,
    resize_bicubic,
    rotate90,
    save_image,
    to_float,
    to_u8,
)
from .srcnn import TrainBatch

_INPUT_SUFFIXES = (".png", ".ppm", ".pgm")
_RESCALES = (1.0, 0.9, 0.8)


@dataclass(frozen=True)
class DegradationConfig:
    blur_sigma: float = 1.0
    downsample_factor: int = 2
    transmission: float = 0.7
    veil: tuple[float, float, float] = (0.35, 0.55, 0.60)
    attenuation: tuple[float, float, float] = (0.6, 0.85, 0.9)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "veil", tuple(float(v) for v in self.veil))
        object.__setattr__(self, "attenuation", tuple(float(v) for v in self.attenuation))
        if self.blur_sigma < 0:
            raise ParameterError(f"blur_sigma must be >= 0, got {self.blur_sigma}")
        if self.downsample_factor < 1:
            raise ParameterError(f"downsample_factor must be >= 1, got {self.downsample_factor}")
        if not 0 < self.transmission <= 1:
            raise ParameterError(f"transmission must be in (0, 1], got {self.transmission}")
        if len(self.veil) != 3 or any(not 0 <= v <= 1 for v in self.veil):
            raise ParameterError(f"veil must be 3 values in [0, 1], got {self.veil}")
        if len(self.attenuation) != 3 or any(not 0 < a <= 1 for a in self.attenuation):
            raise ParameterError(f"attenuation must be 3 values in (0, 1], got {self.attenuation}")


def degrade(img: ImageF, config: DegradationConfig) -> tuple[ImageF, ImageF]:
    """Returns (degraded, ground_truth); ground truth is the divisible crop."""
    if img.channels != 3:
        raise ShapeError(f"degradation needs a 3-channel image, got {img.channels}")
    factor = config.downsample_factor
    crop_h = (img.height // factor) * factor
    crop_w = (img.width // factor) * factor
    if crop_h == 0 or crop_w == 0:
        raise ParameterError(
            f"image {img.height}x{img.width} smaller than downsample factor {factor}"
        )
    gt = ImageF(img.data[:, :crop_h, :crop_w].copy())

    x = gt.data
    attenuation = np.array(config.attenuation)
    if not np.all(attenuation == 1.0):
        x = x * attenuation[:, np.newaxis, np.newaxis]
    t = config.transmission
    if t < 1.0:
        veil = np.array(config.veil)
        x = x * t + veil[:, np.newaxis, np.newaxis] * (1.0 - t)
    degraded = ImageF(x.copy() if x is gt.data else x)
    if config.blur_sigma > 0:
        degraded = filter_gaussian(degraded, config.blur_sigma)
    if factor > 1:
        blocks = degraded.data.reshape(3, crop_h // factor, factor, crop_w // factor, factor)
        degraded = ImageF(blocks.mean(axis=(2, 4)))
    return degraded, gt


def config_digest(config: DegradationConfig) -> str:
    doc = json.dumps(asdict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(doc.encode("ascii")).hexdigest()


@dataclass(frozen=True)
class PairManifest:
    """Absolute ground-truth/degraded path pairs plus the config that made them."""

    pairs: tuple[tuple[Path, Path], ...]
    config: DegradationConfig
    config_hash: str

    def __post_init__(self):
        object.__setattr__(
            self, "pairs", tuple((Path(gt), Path(lr)) for gt, lr in self.pairs)
        )
        if self.config_hash != config_digest(self.config):
            raise FormatError("config_hash does not match config")


def save_manifest(manifest: PairManifest, path) -> None:
    path = Path(path)
    doc = {
        "pairs": [
            {
                "gt": str(gt.relative_to(path.parent)) if gt.is_relative_to(path.parent) else str(gt),
                "degraded": str(lr.relative_to(path.parent)) if lr.is_relative_to(path.parent) else str(lr),
            }
            for gt, lr in manifest.pairs
        ],
        "config": asdict(manifest.config),
        "config_hash": manifest.config_hash,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="ascii")


def load_manifest(path) -> PairManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="ascii"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("manifest must be a JSON object")
    unknown = set(doc) - {"pairs", "config", "config_hash"}
    if unknown:
        raise FormatError(f"unknown manifest key: {sorted(unknown)[0]}")
    for key in ("pairs", "config", "config_hash"):
        if key not in doc:
            raise FormatError(f"manifest missing key: {key}")

    allowed = {f.name for f in fields(DegradationConfig)}
    unknown = set(doc["config"]) - allowed
    if unknown:
        raise FormatError(f"unknown config key: {sorted(unknown)[0]}")
    try:
        config = DegradationConfig(**doc["config"])
    except (ParameterError, TypeError) as exc:
        raise FormatError(f"bad manifest config: {exc}") from exc

    pairs = []
    for entry in doc["pairs"]:
        gt = (path.parent / entry["gt"]).resolve()
        lr = (path.parent / entry["degraded"]).resolve()
        for member in (gt, lr):
            if not member.is_file():
                raise FileNotFoundError(f"manifest references missing file: {member}")
        pairs.append((gt, lr))
    manifest = PairManifest(tuple(pairs), config, doc["config_hash"])
    return manifest


def make_pairs(input_dir, output_dir, config: DegradationConfig) -> PairManifest:
    """Degrade every image in input_dir, write pairs + manifest.json to output_dir."""
    input_dir = Path(input_dir)
    output_dir = Path(output_dir)
    if not input_dir.is_dir():
        raise FileNotFoundError(f"input directory not found: {input_dir}")
    sources = sorted(
        p for p in input_dir.iterdir() if p.suffix.lower() in _INPUT_SUFFIXES
    )
    if not sources:
        raise FileNotFoundError(f"no input images in {input_dir}")
    output_dir.mkdir(parents=True, exist_ok=True)

    pairs = []
    for src in sources:
        img = to_float(load_image(src))
        degraded, gt = degrade(img, config)
        gt_path = (output_dir / f"{src.stem}_gt.png").resolve()
        lr_path = (output_dir / f"{src.stem}_lr.png").resolve()
        save_image(to_u8(gt), gt_path)
        save_image(to_u8(degraded), lr_path)
        pairs.append((gt_path, lr_path))
    manifest = PairManifest(tuple(pairs), config, config_digest(config))
    save_manifest(manifest, output_dir / "manifest.json")
    return manifest


def load_training_pairs(manifest: PairManifest) -> list[tuple[ImageF, ImageF]]:
    """(bicubic-upscaled degraded, ground truth) pairs at ground-truth size."""
    out = []
    for gt_path, lr_path in manifest.pairs:
        gt = to_float(load_image(gt_path))
        lr = to_float(load_image(lr_path))
        out.append((resize_bicubic(lr, gt.height, gt.width), gt))
    return out


def extract_patches(
    lr_upscaled: ImageF, hr: ImageF, patch_size: int, stride: int, seed
) -> TrainBatch:
    """Every aligned grid patch exactly once, in seeded-shuffled order.

    Images smaller than the patch yield an empty batch with a warning rather
    than an error, so a mixed-size corpus degrades gracefully.
    """
    if lr_upscaled.data.shape != hr.data.shape:
        raise ShapeError(
            f"pair members differ: {lr_upscaled.data.shape} vs {hr.data.shape}"
        )
    if patch_size < 1 or stride < 1:
        raise ParameterError(f"patch_size and stride must be >= 1, got {patch_size}, {stride}")
    h, w = lr_upscaled.height, lr_upscaled.width
    if h < patch_size or w < patch_size:
        warnings.warn(f"image {h}x{w} smaller than patch size {patch_size}, skipped")
        return TrainBatch((), ())
    coords = [
        (y, x)
        for y in range(0, h - patch_size + 1, stride)
        for x in range(0, w - patch_size + 1, stride)
    ]
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(coords))
    inputs, targets = [], []
    for idx in order:
        y, x = coords[idx]
        inputs.append(ImageF(lr_upscaled.data[:, y : y + patch_size, x : x + patch_size].copy()))
        targets.append(ImageF(hr.data[:, y : y + patch_size, x : x + patch_size].copy()))
    return TrainBatch(tuple(inputs), tuple(targets))


def augment(lr_patch: ImageF, hr_patch: ImageF, seed) -> tuple[ImageF, ImageF]:
    """Same horizontal flip (p=0.5) and k*90 degree rotation on both members."""
    if lr_patch.height != lr_patch.width:
        raise ShapeError(f"augmentation needs square patches, got {lr_patch.data.shape}")
    rng = np.random.default_rng(seed)
    flip = bool(rng.random() < 0.5)
    quarter = int(rng.integers(0, 4))

    def apply(img: ImageF) -> ImageF:
        if flip:
            img = flip_h(img)
        if quarter:
            img = rotate90(img, quarter)
        return img

    return apply(lr_patch), apply(hr_patch)


class PatchSampler:
    """Shuffled patch stream over rescaled copies of upscaled-LR/HR pairs.

    Each pair is resampled at the factors in `rescales` up front; the patch
    universe is every grid offset of every copy. draw() walks a permutation
    of that universe (reshuffling on exhaustion with the caller's generator)
    and flip/rotate-augments each patch on the way out.
    """

    def __init__(self, pairs, patch_size: int, stride: int, rescales=_RESCALES):
        pairs = list(pairs)
        if not pairs:
            raise ParameterError("no training pairs")
        if patch_size < 1 or stride < 1:
            raise ParameterError(f"patch_size and stride must be >= 1, got {patch_size}, {stride}")
        self.patch_size = patch_size
        self.channels = pairs[0][0].channels
        self._views: list[tuple[ImageF, ImageF]] = []
        self._index: list[tuple[int, int, int]] = []
        for lr, hr in pairs:
            if lr.data.shape != hr.data.shape:
                raise ShapeError(f"pair members differ: {lr.data.shape} vs {hr.data.shape}")
            if lr.channels != self.channels:
                raise ShapeError("mixed channel counts across pairs")
            for scale in rescales:
                new_h = int(round(lr.height * scale))
                new_w = int(round(lr.width * scale))
                if new_h < patch_size or new_w < patch_size:
                    continue
                view = len(self._views)
                if scale == 1.0:
                    self._views.append((lr, hr))
                else:
                    self._views.append(
                        (resize_bicubic(lr, new_h, new_w), resize_bicubic(hr, new_h, new_w))
                    )
                for y in range(0, new_h - patch_size + 1, stride):
                    for x in range(0, new_w - patch_size + 1, stride):
                        self._index.append((view, y, x))
        if not self._index:
            raise ParameterError(
                f"no patches: every image is smaller than patch size {patch_size}"
            )
        self._order: np.ndarray | None = None
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._index)

    def draw(self, batch_size: int, rng: np.random.Generator) -> TrainBatch:
        inputs, targets = [], []
        size = self.patch_size
        for _ in range(batch_size):
            if self._order is None or self._cursor >= len(self._order):
                self._order = rng.permutation(len(self._index))
                self._cursor = 0
            view, y, x = self._index[int(self._order[self._cursor])]
            self._cursor += 1
            lr, hr = self._views[view]
            lr_patch = ImageF(lr.data[:, y : y + size, x : x + size].copy())
            hr_patch = ImageF(hr.data[:, y : y + size, x : x + size].copy())
            lr_patch, hr_patch = augment(lr_patch, hr_patch, rng)
            inputs.append(lr_patch)
            targets.append(hr_patch)
        return TrainBatch(tuple(inputs), tuple(targets))
