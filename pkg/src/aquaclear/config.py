"""JSON pipeline configuration.

One document configures every command; absent fields take the package
defaults, unknown keys and out-of-range values are rejected with the exact
field path (e.g. "msr.scales[0]") so a typo never silently falls back to a
default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .baselines import ClaheConfig
from .dataset import DegradationConfig
from .errors import ConfigError, ParameterError
from .metrics import SsimParams
from .retinex import MsrConfig
from .srcnn import TrainConfig

_MODES = ("full", "srcnn_only", "msr_only")


@dataclass(frozen=True)
class PipelineConfig:
    model_path: Path | None = None
    scale_factor: int = 2
    mode: str = "full"
    msr_first: bool = False  # ablation: enhance before upscaling
    msr: MsrConfig = field(default_factory=MsrConfig)
    ssim: SsimParams = field(default_factory=SsimParams)
    clahe: ClaheConfig = field(default_factory=ClaheConfig)
    degrade: DegradationConfig = field(default_factory=DegradationConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ParameterError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.scale_factor < 1:
            raise ParameterError(f"scale_factor must be >= 1, got {self.scale_factor}")


def _reject_unknown(section: dict, allowed: tuple[str, ...], prefix: str) -> None:
    for key in section:
        if key not in allowed:
            where = f"{prefix}.{key}" if prefix else key
            raise ConfigError(f"unknown key: {where}")


def _number(value, path: str, *, integer: bool = False, boolean: bool = False):
    if boolean:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        kind = "an integer" if integer else "a number"
        raise ConfigError(f"{path}: expected {kind}, got {value!r}")
    if integer and not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _in_range(value, path: str, low=None, high=None, low_open=False, high_open=False):
    if low is not None and (value <= low if low_open else value < low):
        bound = f"> {low}" if low_open else f">= {low}"
        raise ConfigError(f"{path}: must be {bound}, got {value}")
    if high is not None and (value >= high if high_open else value > high):
        bound = f"< {high}" if high_open else f"<= {high}"
        raise ConfigError(f"{path}: must be {bound}, got {value}")
    return value


def _triple(section: dict, key: str, prefix: str, default, low, high, low_open=False):
    if key not in section:
        return default
    raw = section[key]
    if not isinstance(raw, list) or len(raw) != 3:
        raise ConfigError(f"{prefix}.{key}: expected a list of 3 numbers, got {raw!r}")
    out = []
    for i, v in enumerate(raw):
        path = f"{prefix}.{key}[{i}]"
        out.append(_in_range(_number(v, path), path, low, high, low_open=low_open))
    return tuple(out)


def _msr_section(section: dict) -> MsrConfig:
    _reject_unknown(section, ("scales", "epsilon", "low_percentile", "high_percentile"), "msr")
    defaults = MsrConfig()
    scales = defaults.scales
    if "scales" in section:
        raw = section["scales"]
        if not isinstance(raw, list) or not raw:
            raise ConfigError(f"msr.scales: expected a non-empty list, got {raw!r}")
        scales = tuple(
            _in_range(_number(v, f"msr.scales[{i}]"), f"msr.scales[{i}]", 0, low_open=True)
            for i, v in enumerate(raw)
        )
    epsilon = _in_range(
        _number(section.get("epsilon", defaults.epsilon), "msr.epsilon"),
        "msr.epsilon", 0, low_open=True,
    )
    low = _in_range(
        _number(section.get("low_percentile", defaults.low_percentile), "msr.low_percentile"),
        "msr.low_percentile", 0, 100,
    )
    high = _in_range(
        _number(section.get("high_percentile", defaults.high_percentile), "msr.high_percentile"),
        "msr.high_percentile", 0, 100,
    )
    if low >= high:
        raise ConfigError(f"msr.low_percentile: must be < high_percentile, got {low} >= {high}")
    return MsrConfig(scales=scales, epsilon=epsilon, low_percentile=low, high_percentile=high)


def _ssim_section(section: dict) -> SsimParams:
    _reject_unknown(section, ("k1", "k2", "dynamic_range", "window"), "ssim")
    defaults = SsimParams()
    k1 = _in_range(_number(section.get("k1", defaults.k1), "ssim.k1"), "ssim.k1", 0, low_open=True)
    k2 = _in_range(_number(section.get("k2", defaults.k2), "ssim.k2"), "ssim.k2", 0, low_open=True)
    rng = _in_range(
        _number(section.get("dynamic_range", defaults.dynamic_range), "ssim.dynamic_range"),
        "ssim.dynamic_range", 0, low_open=True,
    )
    window = section.get("window", defaults.window)
    if window not in ("gaussian", "global"):
        raise ConfigError(f"ssim.window: must be 'gaussian' or 'global', got {window!r}")
    return SsimParams(k1=k1, k2=k2, dynamic_range=rng, window=window)


def _clahe_section(section: dict) -> ClaheConfig:
    _reject_unknown(section, ("tiles_x", "tiles_y", "clip_limit", "bins"), "clahe")
    defaults = ClaheConfig()
    tiles_x = _in_range(
        _number(section.get("tiles_x", defaults.tiles_x), "clahe.tiles_x", integer=True),
        "clahe.tiles_x", 1,
    )
    tiles_y = _in_range(
        _number(section.get("tiles_y", defaults.tiles_y), "clahe.tiles_y", integer=True),
        "clahe.tiles_y", 1,
    )
    clip = _in_range(
        _number(section.get("clip_limit", defaults.clip_limit), "clahe.clip_limit"),
        "clahe.clip_limit", 1,
    )
    bins = _in_range(
        _number(section.get("bins", defaults.bins), "clahe.bins", integer=True),
        "clahe.bins", 2,
    )
    return ClaheConfig(tiles_x=tiles_x, tiles_y=tiles_y, clip_limit=clip, bins=bins)


def _degrade_section(section: dict) -> DegradationConfig:
    allowed = ("blur_sigma", "downsample_factor", "transmission", "veil", "attenuation", "seed")
    _reject_unknown(section, allowed, "degrade")
    defaults = DegradationConfig()
    return DegradationConfig(
        blur_sigma=_in_range(
            _number(section.get("blur_sigma", defaults.blur_sigma), "degrade.blur_sigma"),
            "degrade.blur_sigma", 0,
        ),
        downsample_factor=_in_range(
            _number(
                section.get("downsample_factor", defaults.downsample_factor),
                "degrade.downsample_factor", integer=True,
            ),
            "degrade.downsample_factor", 1,
        ),
        transmission=_in_range(
            _number(section.get("transmission", defaults.transmission), "degrade.transmission"),
            "degrade.transmission", 0, 1, low_open=True,
        ),
        veil=_triple(section, "veil", "degrade", defaults.veil, 0, 1),
        attenuation=_triple(
            section, "attenuation", "degrade", defaults.attenuation, 0, 1, low_open=True
        ),
        seed=_number(section.get("seed", defaults.seed), "degrade.seed", integer=True),
    )


def _train_section(section: dict) -> TrainConfig:
    allowed = (
        "learning_rate", "optimizer", "momentum", "iterations", "batch_size",
        "patch_size", "patch_stride", "seed", "scale_factor",
        "f1", "f2", "f3", "n1", "n2",
    )
    _reject_unknown(section, allowed, "train")
    defaults = TrainConfig()
    optimizer = section.get("optimizer", defaults.optimizer)
    if optimizer not in ("adam", "sgd"):
        raise ConfigError(f"train.optimizer: must be 'adam' or 'sgd', got {optimizer!r}")
    kwargs = {"optimizer": optimizer}
    int_fields = (
        ("iterations", 0, None),
        ("batch_size", 1, None),
        ("patch_size", 16, None),
        ("patch_stride", 1, None),
        ("seed", None, None),
        ("scale_factor", 1, None),
        ("f1", 1, None),
        ("f2", 1, None),
        ("f3", 1, None),
        ("n1", 1, None),
        ("n2", 1, None),
    )
    for name, low, high in int_fields:
        path = f"train.{name}"
        value = _number(section.get(name, getattr(defaults, name)), path, integer=True)
        kwargs[name] = _in_range(value, path, low, high)
    for name in ("f1", "f2", "f3"):
        if kwargs[name] % 2 == 0:
            raise ConfigError(f"train.{name}: must be odd, got {kwargs[name]}")
    kwargs["learning_rate"] = _in_range(
        _number(section.get("learning_rate", defaults.learning_rate), "train.learning_rate"),
        "train.learning_rate", 0,
    )
    kwargs["momentum"] = _in_range(
        _number(section.get("momentum", defaults.momentum), "train.momentum"),
        "train.momentum", 0, 1, high_open=True,
    )
    return TrainConfig(**kwargs)


def config_from_dict(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"config must be a JSON object, got {type(doc).__name__}")
    allowed = ("model", "scale_factor", "mode", "msr_first", "msr", "ssim", "clahe", "degrade", "train")
    _reject_unknown(doc, allowed, "")
    sections = {}
    for key, builder in (
        ("msr", _msr_section),
        ("ssim", _ssim_section),
        ("clahe", _clahe_section),
        ("degrade", _degrade_section),
        ("train", _train_section),
    ):
        raw = doc.get(key, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"{key}: expected an object, got {raw!r}")
        sections[key] = builder(raw)

    model = doc.get("model")
    if model is not None and not isinstance(model, str):
        raise ConfigError(f"model: expected a path string, got {model!r}")
    mode = doc.get("mode", "full")
    if mode not in _MODES:
        raise ConfigError(f"mode: must be one of {_MODES}, got {mode!r}")
    return PipelineConfig(
        model_path=Path(model) if model else None,
        scale_factor=_in_range(
            _number(doc.get("scale_factor", 2), "scale_factor", integer=True), "scale_factor", 1
        ),
        mode=mode,
        msr_first=_number(doc.get("msr_first", False), "msr_first", boolean=True),
        **sections,
    )


def load_config(path) -> PipelineConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(doc)
