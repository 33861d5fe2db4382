"""Bit-exact binary checkpoints for models plus optimizer state.

Layout (all integers little-endian):

    bytes 0..7    magic ``SIGNCKPT``
    bytes 8..11   format version (u32, currently 1)
    bytes 12..15  header length in bytes (u32)
    header        UTF-8 JSON: model spec, class names, normalization id,
                  optimizer step counter, and an ordered tensor manifest
    payload       raw ``<f4`` tensor data, concatenated in manifest order
    last 4 bytes  CRC32 (u32) of every byte before it

The manifest order per parametric layer is weight, bias, then the Adam
first-moment pair, then the second-moment pair, so saving the same model
twice yields identical bytes. The runtime-only ``frozen`` flag is not
persisted. Writes go through a temp file and an atomic rename.
"""

from __future__ import annotations

import json
import os
import zlib
from pathlib import Path

import numpy as np

from .data import NORMALIZATION_ID
from .errors import CorruptCheckpointError, FormatError, SigncraftError
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
    param_count,
)
from .model import Model, ModelSpec

MAGIC = b"SIGNCKPT"
FORMAT_VERSION = 1

_KIND_TO_CLASS = {
    cls.kind: cls
    for cls in (Conv2D, MaxPool2x2, ReLU, Dropout, Flatten, Dense, Softmax)
}


def _layer_to_dict(layer: LayerSpec) -> dict:
    out = {"kind": layer.kind}
    for name in getattr(layer, "__dataclass_fields__", {}):
        out[name] = getattr(layer, name)
    return out


def _layer_from_dict(obj: dict) -> LayerSpec:
    kind = obj.get("kind")
    cls = _KIND_TO_CLASS.get(kind)
    if cls is None:
        raise CorruptCheckpointError(f"unknown layer kind {kind!r} in header")
    kwargs = {k: v for k, v in obj.items() if k != "kind"}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise CorruptCheckpointError(f"bad {kind} layer in header: {exc}") from exc


def spec_to_dict(spec: ModelSpec) -> dict:
    return {
        "input_shape": list(spec.input_shape),
        "layers": [_layer_to_dict(layer) for layer in spec.layers],
        "class_count": spec.class_count,
    }


def spec_from_dict(obj: dict) -> ModelSpec:
    try:
        layers = tuple(_layer_from_dict(entry) for entry in obj["layers"])
        return ModelSpec(
            input_shape=tuple(obj["input_shape"]),
            layers=layers,
            class_count=int(obj["class_count"]),
        )
    except CorruptCheckpointError:
        raise
    except (KeyError, TypeError, SigncraftError) as exc:
        raise CorruptCheckpointError(f"header does not describe a valid model: {exc}") from exc


def _tensor_manifest(spec: ModelSpec) -> list[tuple[str, tuple[int, ...]]]:
    """Expected (name, shape) pairs, in payload order."""
    manifest: list[tuple[str, tuple[int, ...]]] = []
    for i, layer in enumerate(spec.layers):
        if param_count(layer) == 0:
            continue
        if isinstance(layer, Conv2D):
            w_shape = (layer.out_channels, layer.in_channels, layer.kernel_h, layer.kernel_w)
            b_shape = (layer.out_channels,)
        else:  # Dense
            w_shape = (layer.in_features, layer.out_features)
            b_shape = (layer.out_features,)
        for suffix in ("", ".adam_m", ".adam_v"):
            manifest.append((f"layer{i}.weight{suffix}", w_shape))
            manifest.append((f"layer{i}.bias{suffix}", b_shape))
    return manifest


def _state_tensors(state: LayerState) -> list[np.ndarray]:
    tensors: list[np.ndarray] = []
    for group in (state.params, state.adam_m, state.adam_v):
        tensors.extend(group)
    return tensors


def save_checkpoint(model: Model, class_names: list[str], path: str | Path) -> None:
    """Serialize model weights, optimizer state, and label metadata."""
    if len(class_names) != model.spec.class_count:
        raise ValueError(
            f"{len(class_names)} class names for a {model.spec.class_count}-way model"
        )
    manifest = _tensor_manifest(model.spec)
    header = {
        "model_spec": spec_to_dict(model.spec),
        "class_names": list(class_names),
        "normalization_id": NORMALIZATION_ID,
        "step_counter": model.step_counter,
        "tensors": [[name, list(shape)] for name, shape in manifest],
    }
    header_bytes = json.dumps(header, separators=(",", ":")).encode("utf-8")

    chunks = [
        MAGIC,
        FORMAT_VERSION.to_bytes(4, "little"),
        len(header_bytes).to_bytes(4, "little"),
        header_bytes,
    ]
    cursor = 0
    for state in model.states:
        for tensor in _state_tensors(state):
            name, shape = manifest[cursor]
            if tuple(tensor.shape) != shape:
                raise ValueError(
                    f"{name} has shape {tuple(tensor.shape)}, expected {shape}"
                )
            chunks.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
            cursor += 1
    if cursor != len(manifest):
        raise ValueError("model state does not match its own spec manifest")
    body = b"".join(chunks)
    blob = body + (zlib.crc32(body) & 0xFFFFFFFF).to_bytes(4, "little")

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def load_checkpoint(path: str | Path) -> tuple[Model, list[str]]:
    """Read a checkpoint back into a Model and its class names.

    All layers come back unfrozen; freezing is a run-time training choice.
    """
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:8] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint file (bad magic)")
    if len(data) < 20:
        raise CorruptCheckpointError(f"{path}: file too short")
    version = int.from_bytes(data[8:12], "little")
    if version != FORMAT_VERSION:
        raise FormatError(
            f"{path}: unsupported checkpoint version {version} (expected {FORMAT_VERSION})"
        )
    stored_crc = int.from_bytes(data[-4:], "little")
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CorruptCheckpointError(f"{path}: CRC mismatch, file is damaged")

    header_len = int.from_bytes(data[12:16], "little")
    header_end = 16 + header_len
    if header_end > len(data) - 4:
        raise CorruptCheckpointError(f"{path}: header length exceeds file size")
    try:
        header = json.loads(data[16:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"{path}: unreadable header: {exc}") from exc

    for key in ("model_spec", "class_names", "normalization_id", "step_counter", "tensors"):
        if key not in header:
            raise CorruptCheckpointError(f"{path}: header is missing {key!r}")
    if header["normalization_id"] != NORMALIZATION_ID:
        raise CorruptCheckpointError(
            f"{path}: unknown normalization id {header['normalization_id']!r}"
        )

    spec = spec_from_dict(header["model_spec"])
    class_names = [str(name) for name in header["class_names"]]
    if len(class_names) != spec.class_count:
        raise CorruptCheckpointError(
            f"{path}: {len(class_names)} class names for a {spec.class_count}-way model"
        )

    manifest = _tensor_manifest(spec)
    declared = [(name, tuple(shape)) for name, shape in header["tensors"]]
    if declared != manifest:
        raise CorruptCheckpointError(f"{path}: tensor manifest does not match the model spec")

    payload = data[header_end:-4]
    expected_bytes = sum(int(np.prod(shape)) * 4 for _, shape in manifest)
    if len(payload) != expected_bytes:
        raise CorruptCheckpointError(
            f"{path}: payload holds {len(payload)} bytes, expected {expected_bytes}"
        )

    offset = 0
    tensors: list[np.ndarray] = []
    for _, shape in manifest:
        count = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        tensors.append(arr.reshape(shape).copy())
        offset += count * 4

    states: list[LayerState] = []
    cursor = 0
    for layer in spec.layers:
        if param_count(layer) == 0:
            states.append(LayerState())
            continue
        w, b = tensors[cursor], tensors[cursor + 1]
        mw, mb = tensors[cursor + 2], tensors[cursor + 3]
        vw, vb = tensors[cursor + 4], tensors[cursor + 5]
        states.append(LayerState(params=[w, b], adam_m=[mw, mb], adam_v=[vw, vb]))
        cursor += 6

    step_counter = header["step_counter"]
    if not isinstance(step_counter, int) or step_counter < 0:
        raise CorruptCheckpointError(f"{path}: invalid step_counter {step_counter!r}")
    return Model(spec=spec, states=states, step_counter=step_counter), class_names
