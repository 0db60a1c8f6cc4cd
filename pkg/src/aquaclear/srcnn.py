"""Three-layer super-resolution network.

Forward pass, hand-derived backpropagation, SGD-momentum and Adam updates, a
patch training loop, and a small binary model file. Everything runs in
float64; the file format quantizes to float32 (see save_model).

The network is size-preserving: the low-resolution input is first upscaled
with bicubic resampling, then mapped through

    a1 = relu(conv(x,  w1) + b1)
    a2 = relu(conv(a1, w2) + b2)
    y  =      conv(a2, w3) + b3

with same-size padding. The last layer is linear on purpose; values are only
clamped at the very end of super_resolve and at 8-bit output.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .convolve import PaddingMode, col2im, conv2d_batch, fold_padding, im2col, pad_batch
from .errors import DivergenceError, FormatError, ParameterError, ShapeError
from .image import ImageF, resize_bicubic

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8
_INIT_STD = 1e-3

_MAGIC = b"SRCN"
_FORMAT_VERSION = 1
_HEADER = struct.Struct("<4s7I")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    optimizer: str = "adam"  # "adam" or "sgd" (momentum SGD)
    momentum: float = 0.9
    iterations: int = 5000
    batch_size: int = 16
    patch_size: int = 33
    patch_stride: int = 14
    seed: int = 0
    scale_factor: int = 2
    f1: int = 9
    f2: int = 1
    f3: int = 5
    n1: int = 64
    n2: int = 32

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ParameterError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.optimizer not in ("adam", "sgd"):
            raise ParameterError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if not 0 <= self.momentum < 1:
            raise ParameterError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.iterations < 0:
            raise ParameterError(f"iterations must be >= 0, got {self.iterations}")
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patch_size < 16:
            raise ParameterError(f"patch_size must be >= 16, got {self.patch_size}")
        if self.patch_stride < 1:
            raise ParameterError(f"patch_stride must be >= 1, got {self.patch_stride}")
        if self.scale_factor < 1:
            raise ParameterError(f"scale_factor must be >= 1, got {self.scale_factor}")
        for name in ("f1", "f2", "f3"):
            k = getattr(self, name)
            if k < 1 or k % 2 == 0:
                raise ParameterError(f"{name} must be odd and >= 1, got {k}")
        if self.n1 < 1 or self.n2 < 1:
            raise ParameterError(f"filter counts must be >= 1, got n1={self.n1}, n2={self.n2}")


@dataclass(frozen=True, eq=False)
class SrcnnModel:
    """Weights w_k shaped (c_out, c_in, k, k), biases b_k shaped (c_out,)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        for name in ("w1", "b1", "w2", "b2", "w3", "b3"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            object.__setattr__(self, name, arr)
        for name, want in (("w1", 4), ("w2", 4), ("w3", 4), ("b1", 1), ("b2", 1), ("b3", 1)):
            arr = getattr(self, name)
            if arr.ndim != want:
                raise ShapeError(f"{name} must be {want}-D, got shape {arr.shape}")
            if not np.isfinite(arr).all():
                raise ParameterError(f"{name} contains non-finite values")
        c = self.w1.shape[1]
        if c not in (1, 3):
            raise ShapeError(f"channels must be 1 or 3, got {c}")
        chain = (
            (self.w2.shape[1], self.w1.shape[0], "layer 2 input vs layer 1 output"),
            (self.w3.shape[1], self.w2.shape[0], "layer 3 input vs layer 2 output"),
            (self.w3.shape[0], c, "layer 3 output vs input channels"),
            (self.b1.shape[0], self.w1.shape[0], "bias 1"),
            (self.b2.shape[0], self.w2.shape[0], "bias 2"),
            (self.b3.shape[0], self.w3.shape[0], "bias 3"),
        )
        for got, want, what in chain:
            if got != want:
                raise ShapeError(f"channel mismatch at {what}: {got} != {want}")
        for name in ("w1", "w2", "w3"):
            arr = getattr(self, name)
            if arr.shape[2] != arr.shape[3] or arr.shape[2] % 2 == 0:
                raise ShapeError(f"{name} kernel must be square and odd, got {arr.shape[2:]}")

    @property
    def channels(self) -> int:
        return self.w1.shape[1]

    @property
    def n1(self) -> int:
        return self.w1.shape[0]

    @property
    def n2(self) -> int:
        return self.w2.shape[0]

    @property
    def f1(self) -> int:
        return self.w1.shape[2]

    @property
    def f2(self) -> int:
        return self.w2.shape[2]

    @property
    def f3(self) -> int:
        return self.w3.shape[2]

    def params(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3)


@dataclass(frozen=True, eq=False)
class GradientSet:
    """dLoss/dθ, one array per model tensor, shape-congruent."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def params(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3)


@dataclass(frozen=True)
class TrainBatch:
    """Co-located input/target image lists; inputs are already upscaled."""

    inputs: tuple[ImageF, ...]
    targets: tuple[ImageF, ...]

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "targets", tuple(self.targets))
        if len(self.inputs) != len(self.targets):
            raise ShapeError(
                f"{len(self.inputs)} inputs vs {len(self.targets)} targets"
            )
        for i, (x, t) in enumerate(zip(self.inputs, self.targets)):
            if x.data.shape != t.data.shape:
                raise ShapeError(
                    f"pair {i}: input {x.data.shape} vs target {t.data.shape}"
                )

    def __len__(self) -> int:
        return len(self.inputs)


def _init_params(config: TrainConfig, channels: int, rng: np.random.Generator) -> SrcnnModel:
    def weights(c_out: int, c_in: int, k: int) -> np.ndarray:
        draw = rng.normal(0.0, _INIT_STD, size=(c_out, c_in, k, k))
        # Quantize through float32 so a freshly initialized model survives the
        # float32 file format bit-for-bit.
        return draw.astype(np.float32).astype(np.float64)

    return SrcnnModel(
        w1=weights(config.n1, channels, config.f1),
        b1=np.zeros(config.n1),
        w2=weights(config.n2, config.n1, config.f2),
        b2=np.zeros(config.n2),
        w3=weights(channels, config.n2, config.f3),
        b3=np.zeros(channels),
    )


def srcnn_init(config: TrainConfig, channels: int = 3) -> SrcnnModel:
    """Gaussian(0, 0.001) weights, zero biases, deterministic per seed."""
    if channels not in (1, 3):
        raise ShapeError(f"channels must be 1 or 3, got {channels}")
    return _init_params(config, channels, np.random.default_rng(config.seed))


def _forward_batch(
    model: SrcnnModel, x: np.ndarray, padding: PaddingMode
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (output, z1, z2); z are pre-activation maps kept for backprop."""
    z1 = conv2d_batch(x, model.w1, model.b1, padding)
    z2 = conv2d_batch(np.maximum(z1, 0.0), model.w2, model.b2, padding)
    y = conv2d_batch(np.maximum(z2, 0.0), model.w3, model.b3, padding)
    return y, z1, z2


def srcnn_forward(
    model: SrcnnModel, img: ImageF, padding: PaddingMode = PaddingMode.REPLICATE
) -> ImageF:
    """Run the network on one image. Output is NOT clamped."""
    if img.channels != model.channels:
        raise ShapeError(f"model expects {model.channels} channels, image has {img.channels}")
    y, _, _ = _forward_batch(model, img.data[np.newaxis], padding)
    return ImageF(y[0])


def mse_loss(predictions: list[ImageF], targets: list[ImageF]) -> float:
    """Batch loss: mean over images of the per-pixel mean squared difference."""
    if len(predictions) == 0:
        raise ShapeError("empty batch")
    if len(predictions) != len(targets):
        raise ShapeError(f"{len(predictions)} predictions vs {len(targets)} targets")
    total = 0.0
    for i, (p, t) in enumerate(zip(predictions, targets)):
        if p.data.shape != t.data.shape:
            raise ShapeError(f"pair {i}: prediction {p.data.shape} vs target {t.data.shape}")
        total += float(np.mean((p.data - t.data) ** 2))
    return total / len(predictions)


def _stack_batch(batch: TrainBatch, channels: int) -> tuple[np.ndarray, np.ndarray]:
    if len(batch) == 0:
        raise ShapeError("empty batch")
    shape = batch.inputs[0].data.shape
    for img in batch.inputs[1:]:
        if img.data.shape != shape:
            raise ShapeError(f"mixed patch shapes in batch: {img.data.shape} vs {shape}")
    if shape[0] != channels:
        raise ShapeError(f"model expects {channels} channels, batch has {shape[0]}")
    x = np.stack([img.data for img in batch.inputs])
    t = np.stack([img.data for img in batch.targets])
    return x, t


def _conv_backward(
    dout: np.ndarray,
    layer_input: np.ndarray,
    weights: np.ndarray,
    padding: PaddingMode,
    need_dx: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Gradients of a same-size correlation layer: (dW, db, dX)."""
    n, c_in, h, w = layer_input.shape
    c_out, _, k_h, k_w = weights.shape
    ph, pw = k_h // 2, k_w // 2
    cols = im2col(pad_batch(layer_input, ph, pw, padding), k_h, k_w)
    dmat = np.ascontiguousarray(dout.transpose(0, 2, 3, 1)).reshape(-1, c_out)
    dw = (dmat.T @ cols).reshape(weights.shape)
    db = dout.sum(axis=(0, 2, 3))
    if not need_dx:
        return dw, db, None
    dcols = dmat @ weights.reshape(c_out, -1)
    dxp = col2im(dcols, n, c_in, h + 2 * ph, w + 2 * pw, k_h, k_w)
    return dw, db, fold_padding(dxp, ph, pw, padding)


def srcnn_backward(
    model: SrcnnModel, batch: TrainBatch, padding: PaddingMode = PaddingMode.REPLICATE
) -> tuple[float, GradientSet]:
    """Loss and exact analytic gradients for every weight and bias."""
    x, t = _stack_batch(batch, model.channels)
    y, z1, z2 = _forward_batch(model, x, padding)
    n = x.shape[0]
    per_image = x[0].size
    residual = y - t
    loss = float(np.mean(residual**2))

    # d(mean over images of per-pixel MSE)/dy
    dy = residual * (2.0 / (n * per_image))
    a1 = np.maximum(z1, 0.0)
    a2 = np.maximum(z2, 0.0)
    gw3, gb3, da2 = _conv_backward(dy, a2, model.w3, padding, need_dx=True)
    dz2 = da2 * (z2 > 0.0)
    gw2, gb2, da1 = _conv_backward(dz2, a1, model.w2, padding, need_dx=True)
    dz1 = da1 * (z1 > 0.0)
    gw1, gb1, _ = _conv_backward(dz1, x, model.w1, padding, need_dx=False)
    return loss, GradientSet(w1=gw1, b1=gb1, w2=gw2, b2=gb2, w3=gw3, b3=gb3)


@dataclass
class OptimizerState:
    """First/second moment (Adam) or velocity (SGD) buffers plus step count."""

    step: int
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def zeros(cls, model: SrcnnModel) -> "OptimizerState":
        return cls(
            step=0,
            m=[np.zeros_like(p) for p in model.params()],
            v=[np.zeros_like(p) for p in model.params()],
        )


def train_step(
    model: SrcnnModel,
    batch: TrainBatch,
    config: TrainConfig,
    state: OptimizerState,
    padding: PaddingMode = PaddingMode.REPLICATE,
) -> tuple[SrcnnModel, float]:
    """One optimizer update. Mutates `state`, returns the updated model."""
    loss, grads = srcnn_backward(model, batch, padding)
    if not math.isfinite(loss):
        raise DivergenceError(state.step, loss)
    state.step += 1
    lr = config.learning_rate
    updated = []
    if config.optimizer == "sgd":
        for p, g, vel in zip(model.params(), grads.params(), state.m):
            vel *= config.momentum
            vel += g
            updated.append(p - lr * vel)
    else:
        t = state.step
        bias1 = 1.0 - _ADAM_BETA1**t
        bias2 = 1.0 - _ADAM_BETA2**t
        for p, g, m, v in zip(model.params(), grads.params(), state.m, state.v):
            m *= _ADAM_BETA1
            m += (1.0 - _ADAM_BETA1) * g
            v *= _ADAM_BETA2
            v += (1.0 - _ADAM_BETA2) * g * g
            step = (m / bias1) / (np.sqrt(v / bias2) + _ADAM_EPS)
            updated.append(p - lr * step)
    w1, b1, w2, b2, w3, b3 = updated
    return SrcnnModel(w1=w1, b1=b1, w2=w2, b2=b2, w3=w3, b3=b3), loss


def train(sampler, config: TrainConfig, channels: int = 3) -> tuple[SrcnnModel, list[float]]:
    """Patch training loop.

    `sampler` is anything with draw(batch_size, rng) -> TrainBatch (see
    dataset.PatchSampler). The seed fixes initialization, batch order and
    augmentation, so identical calls give identical loss histories.
    """
    rng = np.random.default_rng(config.seed)
    model = _init_params(config, channels, rng)
    state = OptimizerState.zeros(model)
    history: list[float] = []
    for _ in range(config.iterations):
        batch = sampler.draw(config.batch_size, rng)
        model, loss = train_step(model, batch, config, state)
        history.append(loss)
    return model, history


# ---------------------------------------------------------------------------
# Model file: header "SRCN" + version/shape words, then the six tensors as
# little-endian float32 in parameter order. No padding bytes.
# ---------------------------------------------------------------------------


def save_model(model: SrcnnModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                _MAGIC,
                _FORMAT_VERSION,
                model.channels,
                model.n1,
                model.n2,
                model.f1,
                model.f2,
                model.f3,
            )
        )
        for tensor in model.params():
            fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def load_model(path) -> SrcnnModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"model file truncated in header: {len(raw)} bytes")
    magic, version, channels, n1, n2, f1, f2, f3 = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    if version != _FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}, expected {_FORMAT_VERSION}")
    if channels not in (1, 3):
        raise FormatError(f"channels must be 1 or 3, got {channels}")
    for name, k in (("f1", f1), ("f2", f2), ("f3", f3)):
        if k < 1 or k % 2 == 0:
            raise FormatError(f"{name} must be odd and >= 1, got {k}")
    if n1 < 1 or n2 < 1:
        raise FormatError(f"filter counts must be >= 1, got n1={n1}, n2={n2}")

    shapes = (
        (n1, channels, f1, f1),
        (n1,),
        (n2, n1, f2, f2),
        (n2,),
        (channels, n2, f3, f3),
        (channels,),
    )
    offset = _HEADER.size
    tensors = []
    for name, shape in zip(("w1", "b1", "w2", "b2", "w3", "b3"), shapes):
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(raw):
            raise FormatError(f"model file truncated in tensor {name}")
        flat = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        tensors.append(flat.astype(np.float64).reshape(shape))
        offset = end
    if offset != len(raw):
        raise FormatError(f"{len(raw) - offset} trailing bytes after tensors")
    w1, b1, w2, b2, w3, b3 = tensors
    return SrcnnModel(w1=w1, b1=b1, w2=w2, b2=b2, w3=w3, b3=b3)


def super_resolve(model: SrcnnModel, lr_image: ImageF, scale_factor: int = 2) -> ImageF:
    """Bicubic upscale then network refinement; output clamped to [0, 1]."""
    if scale_factor < 1:
        raise ParameterError(f"scale_factor must be >= 1, got {scale_factor}")
    if lr_image.channels != model.channels:
        raise ShapeError(
            f"model expects {model.channels} channels, image has {lr_image.channels}"
        )
    up = resize_bicubic(lr_image, lr_image.height * scale_factor, lr_image.width * scale_factor)
    out = srcnn_forward(model, up, PaddingMode.REPLICATE)
    return ImageF(np.clip(out.data, 0.0, 1.0))
