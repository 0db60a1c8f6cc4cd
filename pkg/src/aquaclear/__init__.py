"""aquaclear: underwater image enhancement.

A from-scratch three-layer super-resolution network trained with
hand-written backpropagation, composed with multi-scale retinex defogging,
plus the classic baselines (HE, CLAHE, SSR) and the metrics (PSNR, SSIM,
colorfulness) needed to compare them.
"""

from .baselines import ClaheConfig, clahe, hist_equalize, ssr
from .config import PipelineConfig, load_config
from .convolve import Kernel2D, PaddingMode, conv2d, filter_gaussian, gaussian_kernel_1d
from .dataset import (
    DegradationConfig,
    PairManifest,
    PatchSampler,
    augment,
    degrade,
    extract_patches,
    load_manifest,
    load_training_pairs,
    make_pairs,
)
from .errors import (
    ConfigError,
    DivergenceError,
    FormatError,
    NumericError,
    ParameterError,
    ShapeError,
)
from .image import (
    ImageF,
    ImageU8,
    load_image,
    resize_bicubic,
    rgb_to_luma,
    save_image,
    to_float,
    to_u8,
)
from .metrics import MetricsReport, SsimParams, colorfulness, evaluate_pair, psnr, ssim
from .retinex import MsrConfig, illumination_estimate, msr_enhance, msr_normalize, msr_raw
from .srcnn import (
    GradientSet,
    OptimizerState,
    SrcnnModel,
    TrainBatch,
    TrainConfig,
    load_model,
    mse_loss,
    save_model,
    srcnn_backward,
    srcnn_forward,
    srcnn_init,
    super_resolve,
    train,
    train_step,
)
from .synth import synth_scene, synth_set

__version__ = "0.1.0"

__all__ = [
    "ClaheConfig", "clahe", "hist_equalize", "ssr",
    "PipelineConfig", "load_config",
    "Kernel2D", "PaddingMode", "conv2d", "filter_gaussian", "gaussian_kernel_1d",
    "DegradationConfig", "PairManifest", "PatchSampler", "augment", "degrade",
    "extract_patches", "load_manifest", "load_training_pairs", "make_pairs",
    "ConfigError", "DivergenceError", "FormatError", "NumericError",
    "ParameterError", "ShapeError",
    "ImageF", "ImageU8", "load_image", "resize_bicubic", "rgb_to_luma",
    "save_image", "to_float", "to_u8",
    "MetricsReport", "SsimParams", "colorfulness", "evaluate_pair", "psnr", "ssim",
    "MsrConfig", "illumination_estimate", "msr_enhance", "msr_normalize", "msr_raw",
    "GradientSet", "OptimizerState", "SrcnnModel", "TrainBatch", "TrainConfig",
    "load_model", "mse_loss", "save_model", "srcnn_backward", "srcnn_forward",
    "srcnn_init", "super_resolve", "train", "train_step",
    "synth_scene", "synth_set",
    "__version__",
]
