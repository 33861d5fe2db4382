"""Reusing a trained network on a new label space.

The workflow is: load a base checkpoint, swap the classifier head for a
freshly initialized one sized to the new class count, optionally freeze the
convolutional stack, then fit on the new dataset.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .data import Dataset, stratified_split
from .errors import InvalidArchitectureError
from .layers import Conv2D, Dense, LayerState, init_params
from .model import Model, ModelSpec
from .rng import Rng, derive_seed
from .train import STREAM_INIT, STREAM_SPLIT, History, TrainConfig, fit


def _copy_state(state: LayerState) -> LayerState:
    return LayerState(
        params=[p.copy() for p in state.params],
        adam_m=[m.copy() for m in state.adam_m],
        adam_v=[v.copy() for v in state.adam_v],
        frozen=state.frozen,
    )


def replace_head(model: Model, new_class_count: int, rng: Rng) -> Model:
    """Return a model with a fresh classifier head for ``new_class_count``.

    Every layer below the head keeps its weights and optimizer moments
    bit for bit; the head gets new He-initialized weights, zero bias, and
    zero moments; the optimizer step counter restarts at 0.
    """
    if new_class_count < 1:
        raise ValueError(f"new_class_count must be positive, got {new_class_count}")
    head_index = None
    for i, layer in enumerate(model.spec.layers):
        if isinstance(layer, Dense):
            head_index = i
    if head_index is None:
        raise InvalidArchitectureError("model has no dense layer to use as a head")

    old_head = model.spec.layers[head_index]
    new_head = Dense(in_features=old_head.in_features, out_features=new_class_count)
    new_layers = (
        model.spec.layers[:head_index]
        + (new_head,)
        + model.spec.layers[head_index + 1 :]
    )
    new_spec = ModelSpec(
        input_shape=model.spec.input_shape,
        layers=new_layers,
        class_count=new_class_count,
    )

    dtype = (
        model.states[head_index].params[0].dtype
        if model.states[head_index].params
        else np.float32
    )
    new_states: list[LayerState] = []
    for i, state in enumerate(model.states):
        if i == head_index:
            fresh = init_params(new_head, rng, dtype=dtype)
            fresh.frozen = state.frozen
            new_states.append(fresh)
        else:
            new_states.append(_copy_state(state))
    return Model(spec=new_spec, states=new_states, step_counter=0)


def set_frozen(model: Model, selector, frozen: bool = True) -> Model:
    """Mark layers as frozen (excluded from optimizer updates), in place.

    ``selector`` is ``"conv"`` (every convolution layer), ``"none"`` (no
    layers; combined with frozen=True this is a no-op), or an iterable of
    layer indices. Returns the same model for chaining.
    """
    if isinstance(selector, str):
        if selector == "conv":
            indices = [
                i for i, layer in enumerate(model.spec.layers) if isinstance(layer, Conv2D)
            ]
        elif selector == "none":
            indices = []
        else:
            raise ValueError(f"unknown freeze selector {selector!r}")
    else:
        indices = list(selector)
        for i in indices:
            if not 0 <= i < len(model.spec.layers):
                raise IndexError(
                    f"layer index {i} out of range for a {len(model.spec.layers)}-layer model"
                )
    for i in indices:
        model.states[i].frozen = frozen
    return model


def fine_tune(
    base_path: str | Path,
    dataset: Dataset,
    config: TrainConfig,
    freeze: str = "none",
    out_path: str | Path | None = None,
) -> tuple[History, Model]:
    """Load a base checkpoint, retarget it to ``dataset``, and train.

    The head is re-initialized for the new class count, ``freeze`` picks
    which layers stay fixed ("none" or "conv"), and the split/init/fit
    randomness all derive from ``config.seed`` exactly as in from-scratch
    training. Returns the per-epoch history and the tuned model.
    """
    base, _ = load_checkpoint(base_path)
    head_rng = Rng(derive_seed(config.seed, STREAM_INIT))
    model = replace_head(base, len(dataset.class_names), head_rng)
    set_frozen(model, freeze, frozen=True)

    split_rng = Rng(derive_seed(config.seed, STREAM_SPLIT))
    train_set, val_set = stratified_split(dataset, config.val_fraction, split_rng)
    history = fit(model, train_set, val_set, config)
    if out_path is not None:
        save_checkpoint(model, dataset.class_names, out_path)
    return history, model
