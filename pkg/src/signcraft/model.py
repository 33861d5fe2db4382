"""Model assembly: ordered layer specs, shape inference, forward/backward.

A Model is a ModelSpec plus one LayerState per layer and the Adam step
counter. The final two layers are always Dense(out_features == class_count)
followed by Softmax; training relies on that to fuse the softmax gradient
with the cross-entropy loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArchitectureError, ShapeError
from .layers import (
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    LayerSpec,
    LayerState,
    MaxPool2x2,
    ReLU,
    Softmax,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    dropout_backward,
    dropout_forward,
    flatten_backward,
    flatten_forward,
    init_params,
    maxpool2x2_backward,
    maxpool2x2_forward,
    param_count,
    relu_backward,
    relu_forward,
    softmax,
)
from .rng import Rng
from .tensor import DEFAULT_DTYPE, Tensor


@dataclass(frozen=True)
class ModelSpec:
    input_shape: tuple[int, int, int]  # (channels, height, width)
    layers: tuple[LayerSpec, ...]
    class_count: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        infer_output_shapes(self)  # raises if the chain is inconsistent


def infer_output_shapes(spec: ModelSpec) -> list[tuple[int, ...]]:
    """Per-sample output shape after each layer; validates the whole chain."""
    if spec.class_count < 1:
        raise InvalidArchitectureError("class_count must be >= 1")
    shape: tuple[int, ...] = tuple(spec.input_shape)
    if len(shape) != 3 or any(d < 1 for d in shape):
        raise ShapeError(f"input_shape must be (C,H,W) with positive dims, got {shape}")
    shapes = []
    for i, layer in enumerate(spec.layers):
        try:
            shape = _layer_output_shape(layer, shape)
        except ShapeError as exc:
            raise ShapeError(f"layer {i} ({layer.kind}): {exc}") from exc
        shapes.append(shape)
    if len(spec.layers) < 2 or not isinstance(spec.layers[-1], Softmax):
        raise InvalidArchitectureError("final layer must be Softmax")
    head = spec.layers[-2]
    if not isinstance(head, Dense):
        raise InvalidArchitectureError("Softmax must be preceded by a Dense head")
    if head.out_features != spec.class_count:
        raise InvalidArchitectureError(
            f"Dense head has {head.out_features} outputs, class_count is {spec.class_count}"
        )
    return shapes


def _layer_output_shape(layer: LayerSpec, shape: tuple[int, ...]) -> tuple[int, ...]:
    if isinstance(layer, Conv2D):
        if len(shape) != 3:
            raise ShapeError(f"conv2d needs a (C,H,W) input, got {shape}")
        c, h, w = shape
        if c != layer.in_channels:
            raise ShapeError(f"input has {c} channels, conv2d expects {layer.in_channels}")
        if layer.kernel_h > h or layer.kernel_w > w:
            raise ShapeError(
                f"kernel {layer.kernel_h}x{layer.kernel_w} does not fit in {h}x{w}"
            )
        return (layer.out_channels, h - layer.kernel_h + 1, w - layer.kernel_w + 1)
    if isinstance(layer, MaxPool2x2):
        if len(shape) != 3:
            raise ShapeError(f"maxpool2x2 needs a (C,H,W) input, got {shape}")
        c, h, w = shape
        if h < 2 or w < 2:
            raise ShapeError(f"maxpool2x2 needs H,W >= 2, got {h}x{w}")
        return (c, h // 2, w // 2)
    if isinstance(layer, Flatten):
        if len(shape) != 3:
            raise ShapeError(f"flatten needs a (C,H,W) input, got {shape}")
        return (int(np.prod(shape)),)
    if isinstance(layer, Dense):
        if len(shape) != 1:
            raise ShapeError(f"dense needs a flat input, got {shape}")
        if shape[0] != layer.in_features:
            raise ShapeError(f"input has {shape[0]} features, dense expects {layer.in_features}")
        return (layer.out_features,)
    if isinstance(layer, Softmax):
        if len(shape) != 1:
            raise ShapeError(f"softmax needs a flat input, got {shape}")
        return shape
    # ReLU / Dropout keep their input shape at any rank
    return shape


def canonical_spec(
    class_count: int,
    input_shape: tuple[int, int, int] = (3, 32, 32),
    hidden: int = 64,
    dropout_rates: tuple[float, float] = (0.25, 0.5),
) -> ModelSpec:
    """The toolkit's standard two-conv architecture.

    conv(3x3)->relu->pool repeated twice, then flatten, dropout, a hidden
    dense layer, dropout again, and the classification head.
    """
    c, h, w = input_shape
    flat = 64 * (((h - 2) // 2 - 2) // 2) * (((w - 2) // 2 - 2) // 2)
    layers: tuple[LayerSpec, ...] = (
        Conv2D(c, 32, 3, 3),
        ReLU(),
        MaxPool2x2(),
        Conv2D(32, 64, 3, 3),
        ReLU(),
        MaxPool2x2(),
        Flatten(),
        Dropout(dropout_rates[0]),
        Dense(flat, hidden),
        ReLU(),
        Dropout(dropout_rates[1]),
        Dense(hidden, class_count),
        Softmax(),
    )
    return ModelSpec(input_shape=input_shape, layers=layers, class_count=class_count)


@dataclass
class Model:
    spec: ModelSpec
    states: list[LayerState]
    step_counter: int = 0


def init_model(spec: ModelSpec, rng: Rng, dtype=DEFAULT_DTYPE) -> Model:
    return Model(spec=spec, states=[init_params(l, rng, dtype) for l in spec.layers])


def model_forward(
    model: Model,
    batch: Tensor,
    training: bool = False,
    rng: Rng | None = None,
) -> tuple[Tensor, list]:
    """Run all layers in order; returns (probabilities [N,K], caches).

    The caches hold per-layer inputs/masks needed by model_backward.
    Eval phase (training=False) makes dropout the identity, so repeated
    calls on the same batch are bit-identical.
    """
    if batch.ndim != 4 or batch.shape[1:] != tuple(model.spec.input_shape):
        raise ShapeError(
            f"batch shape {batch.shape} does not match input shape "
            f"(N, {', '.join(map(str, model.spec.input_shape))})"
        )
    if training and rng is None:
        raise ValueError("training-phase forward needs an rng for dropout")
    x = batch
    caches: list = []
    for i, (layer, state) in enumerate(zip(model.spec.layers, model.states)):
        try:
            if isinstance(layer, Conv2D):
                caches.append(x)
                x = conv2d_forward(x, state.params[0], state.params[1])
            elif isinstance(layer, MaxPool2x2):
                in_shape = x.shape
                x, argmax = maxpool2x2_forward(x)
                caches.append((argmax, in_shape))
            elif isinstance(layer, ReLU):
                caches.append(x)
                x = relu_forward(x)
            elif isinstance(layer, Dropout):
                x, mask = dropout_forward(x, layer.rate, rng, training)
                caches.append(mask)
            elif isinstance(layer, Flatten):
                caches.append(x.shape)
                x = flatten_forward(x)
            elif isinstance(layer, Dense):
                caches.append(x)
                x = dense_forward(x, state.params[0], state.params[1])
            elif isinstance(layer, Softmax):
                caches.append(None)
                x = softmax(x)
            else:  # pragma: no cover - exhaustive over LayerSpec
                raise TypeError(f"unknown layer kind {layer!r}")
        except ShapeError as exc:
            raise ShapeError(f"layer {i} ({layer.kind}): {exc}") from exc
    return x, caches


def model_backward(
    model: Model, caches: list, grad_logits: Tensor
) -> list[list[Tensor] | None]:
    """Backpropagate from the gradient w.r.t. pre-softmax logits.

    The final Softmax layer is skipped: its gradient is assumed fused into
    grad_logits by the cross-entropy loss. Returns one gradient list per
    layer ([dW, db] for parametric layers, None otherwise), aligned with
    model.states.
    """
    if not isinstance(model.spec.layers[-1], Softmax):
        raise InvalidArchitectureError("model_backward expects a Softmax-terminated model")
    grads: list[list[Tensor] | None] = [None] * len(model.spec.layers)
    g = grad_logits
    for i in range(len(model.spec.layers) - 2, -1, -1):
        layer, state, cache = model.spec.layers[i], model.states[i], caches[i]
        if isinstance(layer, Conv2D):
            g, dw, db = conv2d_backward(cache, state.params[0], g)
            grads[i] = [dw, db]
        elif isinstance(layer, MaxPool2x2):
            argmax, in_shape = cache
            g = maxpool2x2_backward(argmax, in_shape, g)
        elif isinstance(layer, ReLU):
            g = relu_backward(cache, g)
        elif isinstance(layer, Dropout):
            if cache is not None:
                g = dropout_backward(cache, layer.rate, g)
        elif isinstance(layer, Flatten):
            g = flatten_backward(cache, g)
        elif isinstance(layer, Dense):
            g, dw, db = dense_backward(cache, state.params[0], g)
            grads[i] = [dw, db]
    return grads


# ---------------------------------------------------------------------------
# summary

@dataclass(frozen=True)
class SummaryRow:
    name: str
    output_shape: tuple[int, ...]
    params: int
    frozen: bool


@dataclass(frozen=True)
class ModelSummary:
    rows: tuple[SummaryRow, ...]
    total_params: int
    trainable_params: int


def model_summary(spec: ModelSpec, states: list[LayerState] | None = None) -> ModelSummary:
    """One row per layer (name, inferred output shape, param count) + totals."""
    shapes = infer_output_shapes(spec)
    rows = []
    for i, (layer, shape) in enumerate(zip(spec.layers, shapes)):
        frozen = bool(states[i].frozen) if states is not None else False
        rows.append(
            SummaryRow(
                name=f"{layer.kind}_{i}",
                output_shape=shape,
                params=param_count(layer),
                frozen=frozen,
            )
        )
    total = sum(r.params for r in rows)
    trainable = sum(r.params for r in rows if not r.frozen)
    return ModelSummary(rows=tuple(rows), total_params=total, trainable_params=trainable)


def format_summary(summary: ModelSummary) -> str:
    name_w = max(len(r.name) for r in summary.rows)
    shape_strs = ["x".join(map(str, r.output_shape)) for r in summary.rows]
    shape_w = max(len(s) for s in shape_strs)
    lines = [f"{'layer':<{name_w}}  {'output':<{shape_w}}  params"]
    for row, shape_s in zip(summary.rows, shape_strs):
        marker = "  [frozen]" if row.frozen else ""
        lines.append(f"{row.name:<{name_w}}  {shape_s:<{shape_w}}  {row.params}{marker}")
    lines.append(
        f"total params: {summary.total_params} "
        f"(trainable: {summary.trainable_params}, "
        f"frozen: {summary.total_params - summary.trainable_params})"
    )
    return "\n".join(lines)
