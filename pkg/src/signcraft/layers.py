"""Layer definitions: hyperparameter specs plus forward/backward passes.

All spatial ops take NCHW batches. Convolution is valid-padding, stride 1;
pooling is fixed 2x2/stride 2. Forward functions return whatever cache their
backward needs; backward functions are exact analytic gradients (verified
against central finite differences in the test suite).

The ops are dtype-polymorphic: float32 in normal use, float64 when callers
need headroom for numeric checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar, Union

import numpy as np

from .errors import ShapeError
from .rng import Rng
from .tensor import DEFAULT_DTYPE, Tensor


@dataclass(frozen=True)
class Conv2D:
    kind: ClassVar[str] = "conv2d"
    in_channels: int
    out_channels: int
    kernel_h: int = 3
    kernel_w: int = 3

    def __post_init__(self):
        for name in ("in_channels", "out_channels", "kernel_h", "kernel_w"):
            if getattr(self, name) < 1:
                raise ShapeError(f"Conv2D.{name} must be >= 1")


@dataclass(frozen=True)
class MaxPool2x2:
    kind: ClassVar[str] = "maxpool2x2"


@dataclass(frozen=True)
class ReLU:
    kind: ClassVar[str] = "relu"


@dataclass(frozen=True)
class Dropout:
    kind: ClassVar[str] = "dropout"
    rate: float

    def __post_init__(self):
        if not 0.0 < self.rate < 1.0:
            raise ValueError(f"dropout rate must lie strictly in (0, 1), got {self.rate}")


@dataclass(frozen=True)
class Flatten:
    kind: ClassVar[str] = "flatten"


@dataclass(frozen=True)
class Dense:
    kind: ClassVar[str] = "dense"
    in_features: int
    out_features: int

    def __post_init__(self):
        if self.in_features < 1 or self.out_features < 1:
            raise ShapeError("Dense feature counts must be >= 1")


@dataclass(frozen=True)
class Softmax:
    kind: ClassVar[str] = "softmax"


LayerSpec = Union[Conv2D, MaxPool2x2, ReLU, Dropout, Flatten, Dense, Softmax]


@dataclass
class LayerState:
    """Learnable parameters plus Adam moments for one layer.

    ``adam_m``/``adam_v`` always mirror ``params`` shape-for-shape. A frozen
    layer is skipped entirely by the optimizer: params and moments stay
    bit-identical across any number of steps.
    """

    params: list[Tensor] = field(default_factory=list)
    adam_m: list[Tensor] = field(default_factory=list)
    adam_v: list[Tensor] = field(default_factory=list)
    frozen: bool = False


# ---------------------------------------------------------------------------
# convolution

def _require_nchw(x: Tensor, who: str) -> None:
    if x.ndim != 4:
        raise ShapeError(f"{who} expects an NCHW batch, got shape {x.shape}")


def _im2col(x: Tensor, kh: int, kw: int) -> Tensor:
    """Window the input into a [N*Ho*Wo, C*kh*kw] matrix."""
    n, c, h, w = x.shape
    ho, wo = h - kh + 1, w - kw + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n * ho * wo, c * kh * kw
    )


def conv2d_forward(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Valid cross-correlation: out[n,o,y,x] = b[o] + sum in[n,c,y+i,x+j]*w[o,c,i,j]."""
    _require_nchw(x, "conv2d")
    n, c, h, w = x.shape
    out_c, in_c, kh, kw = weights.shape
    if c != in_c:
        raise ShapeError(f"conv2d input has {c} channels, weights expect {in_c}")
    if kh > h or kw > w:
        raise ShapeError(f"kernel {kh}x{kw} does not fit in input {h}x{w}")
    ho, wo = h - kh + 1, w - kw + 1
    cols = _im2col(x, kh, kw)
    y = cols @ weights.reshape(out_c, -1).T + bias
    return np.ascontiguousarray(y.reshape(n, ho, wo, out_c).transpose(0, 3, 1, 2))


def conv2d_backward(
    x: Tensor, weights: Tensor, grad: Tensor
) -> tuple[Tensor, Tensor, Tensor]:
    """Gradients (dx, dw, db) for conv2d_forward given the upstream gradient."""
    n, c, h, w = x.shape
    out_c, _, kh, kw = weights.shape
    ho, wo = h - kh + 1, w - kw + 1
    if grad.shape != (n, out_c, ho, wo):
        raise ShapeError(
            f"conv2d upstream gradient shape {grad.shape} != {(n, out_c, ho, wo)}"
        )
    g2 = np.ascontiguousarray(grad.transpose(0, 2, 3, 1)).reshape(n * ho * wo, out_c)
    cols = _im2col(x, kh, kw)
    dw = (g2.T @ cols).reshape(weights.shape)
    db = g2.sum(axis=0)
    # dx = full correlation of the upstream gradient with 180deg-rotated kernels
    gp = np.pad(grad, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
    gcols = _im2col(gp, kh, kw)  # [N*H*W, O*kh*kw]
    w_rot = weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3).reshape(c, -1)
    dx = (gcols @ w_rot.T).reshape(n, h, w, c).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(dx), dw, db


# ---------------------------------------------------------------------------
# pooling

def maxpool2x2_forward(x: Tensor) -> tuple[Tensor, Tensor]:
    """2x2/stride-2 max pooling; odd trailing rows/cols are dropped.

    Returns (output, argmax) where argmax stores, per window, the index of
    the first maximum in row-major window order.
    """
    _require_nchw(x, "maxpool2x2")
    n, c, h, w = x.shape
    if h < 2 or w < 2:
        raise ShapeError(f"maxpool2x2 needs H,W >= 2, got {h}x{w}")
    ho, wo = h // 2, w // 2
    win = (
        x[:, :, : ho * 2, : wo * 2]
        .reshape(n, c, ho, 2, wo, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, ho, wo, 4)
    )
    argmax = win.argmax(axis=-1)
    out = np.take_along_axis(win, argmax[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), argmax


def maxpool2x2_backward(
    argmax: Tensor, input_shape: tuple[int, ...], grad: Tensor
) -> Tensor:
    """Route the upstream gradient to each window's argmax; zeros elsewhere."""
    n, c, h, w = input_shape
    ho, wo = grad.shape[2], grad.shape[3]
    buf = np.zeros((n, c, ho, wo, 4), dtype=grad.dtype)
    np.put_along_axis(buf, argmax[..., None], grad[..., None], axis=-1)
    dx = np.zeros(input_shape, dtype=grad.dtype)
    dx[:, :, : ho * 2, : wo * 2] = (
        buf.reshape(n, c, ho, wo, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, ho * 2, wo * 2)
    )
    return dx


# ---------------------------------------------------------------------------
# pointwise and dense

def relu_forward(x: Tensor) -> Tensor:
    return np.maximum(x, 0)


def relu_backward(x: Tensor, grad: Tensor) -> Tensor:
    # subgradient at exactly 0 is defined as 0
    return grad * (x > 0)


def dropout_forward(
    x: Tensor, rate: float, rng: Rng, training: bool
) -> tuple[Tensor, Tensor | None]:
    """Inverted dropout: keep with prob 1-rate and rescale; identity in eval.

    Returns (output, mask); mask is None in eval phase.
    """
    if not 0.0 < rate < 1.0:
        raise ValueError(f"dropout rate must lie strictly in (0, 1), got {rate}")
    if not training:
        return x, None
    keep = 1.0 - rate
    mask = (rng.uniform_array(x.size) < keep).reshape(x.shape)
    return x * mask * x.dtype.type(1.0 / keep), mask


def dropout_backward(mask: Tensor, rate: float, grad: Tensor) -> Tensor:
    return grad * mask * grad.dtype.type(1.0 / (1.0 - rate))


def dense_forward(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """y = x W + b for x [N,F], W [F,M], b [M]."""
    if x.ndim != 2:
        raise ShapeError(f"dense expects a 2-D batch, got shape {x.shape}")
    if x.shape[1] != weights.shape[0]:
        raise ShapeError(
            f"dense input has {x.shape[1]} features, weights expect {weights.shape[0]}"
        )
    return x @ weights + bias


def dense_backward(
    x: Tensor, weights: Tensor, grad: Tensor
) -> tuple[Tensor, Tensor, Tensor]:
    if grad.shape != (x.shape[0], weights.shape[1]):
        raise ShapeError(
            f"dense upstream gradient shape {grad.shape} != "
            f"{(x.shape[0], weights.shape[1])}"
        )
    return grad @ weights.T, x.T @ grad, grad.sum(axis=0)


def flatten_forward(x: Tensor) -> Tensor:
    _require_nchw(x, "flatten")
    return x.reshape(x.shape[0], -1)


def flatten_backward(input_shape: tuple[int, ...], grad: Tensor) -> Tensor:
    return grad.reshape(input_shape)


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax with max-subtraction for overflow safety."""
    if x.ndim != 2:
        raise ShapeError(f"softmax expects a 2-D batch, got shape {x.shape}")
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# parameters

def param_count(spec: LayerSpec) -> int:
    if isinstance(spec, Conv2D):
        return (
            spec.out_channels * spec.in_channels * spec.kernel_h * spec.kernel_w
            + spec.out_channels
        )
    if isinstance(spec, Dense):
        return spec.in_features * spec.out_features + spec.out_features
    return 0


def init_params(spec: LayerSpec, rng: Rng, dtype=DEFAULT_DTYPE) -> LayerState:
    """He-initialized weights (std sqrt(2/fan_in)), zero biases, zero moments."""
    if isinstance(spec, Conv2D):
        fan_in = spec.in_channels * spec.kernel_h * spec.kernel_w
        shape = (spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w)
        weights = (
            rng.normal_array(int(np.prod(shape)), 0.0, np.sqrt(2.0 / fan_in))
            .reshape(shape)
            .astype(dtype)
        )
        bias = np.zeros(spec.out_channels, dtype=dtype)
        params = [weights, bias]
    elif isinstance(spec, Dense):
        fan_in = spec.in_features
        weights = (
            rng.normal_array(fan_in * spec.out_features, 0.0, np.sqrt(2.0 / fan_in))
            .reshape(fan_in, spec.out_features)
            .astype(dtype)
        )
        bias = np.zeros(spec.out_features, dtype=dtype)
        params = [weights, bias]
    else:
        params = []
    return LayerState(
        params=params,
        adam_m=[np.zeros_like(p) for p in params],
        adam_v=[np.zeros_like(p) for p in params],
    )
