"""A small from-scratch CNN toolkit: training, transfer, and evaluation.

Everything is built on numpy arrays with explicit forward/backward passes,
a seeded deterministic RNG, and a bit-exact checkpoint format, so identical
inputs always produce identical artifacts.
"""

from .errors import (
    CorruptCheckpointError,
    CorruptFileError,
    EmptyDatasetError,
    FormatError,
    InvalidArchitectureError,
    ShapeError,
    SigncraftError,
    UnsupportedFormatError,
)
from .rng import Rng, derive_seed
from .tensor import DEFAULT_DTYPE, Tensor, tensor_new
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
    init_params,
    param_count,
    softmax,
)
from .model import (
    Model,
    ModelSpec,
    ModelSummary,
    canonical_spec,
    format_summary,
    infer_output_shapes,
    init_model,
    model_backward,
    model_forward,
    model_summary,
)
from .train import (
    Evaluation,
    EpochMetrics,
    History,
    TrainConfig,
    adam_step,
    cross_entropy,
    evaluate,
    fit,
    one_hot,
    one_hot_batch,
    run_epoch,
)
from .data import (
    Dataset,
    RawImage,
    decode_ppm,
    encode_ppm,
    load_directory_dataset,
    normalize,
    resize_bilinear,
    stratified_split,
)
from .synth import synth_generate
from .checkpoint import load_checkpoint, save_checkpoint
from .transfer import fine_tune, replace_head, set_frozen
from .reports import (
    PredictionRecord,
    read_metrics_csv,
    read_predictions_csv,
    write_confusion_csv,
    write_metrics_csv,
    write_predictions_csv,
)

__version__ = "0.1.0"

__all__ = [
    "CorruptCheckpointError",
    "CorruptFileError",
    "EmptyDatasetError",
    "FormatError",
    "InvalidArchitectureError",
    "ShapeError",
    "SigncraftError",
    "UnsupportedFormatError",
    "Rng",
    "derive_seed",
    "DEFAULT_DTYPE",
    "Tensor",
    "tensor_new",
    "Conv2D",
    "Dense",
    "Dropout",
    "Flatten",
    "LayerSpec",
    "LayerState",
    "MaxPool2x2",
    "ReLU",
    "Softmax",
    "init_params",
    "param_count",
    "softmax",
    "Model",
    "ModelSpec",
    "ModelSummary",
    "canonical_spec",
    "format_summary",
    "infer_output_shapes",
    "init_model",
    "model_backward",
    "model_forward",
    "model_summary",
    "Evaluation",
    "EpochMetrics",
    "History",
    "TrainConfig",
    "adam_step",
    "cross_entropy",
    "evaluate",
    "fit",
    "one_hot",
    "one_hot_batch",
    "run_epoch",
    "Dataset",
    "RawImage",
    "decode_ppm",
    "encode_ppm",
    "load_directory_dataset",
    "normalize",
    "resize_bilinear",
    "stratified_split",
    "synth_generate",
    "load_checkpoint",
    "save_checkpoint",
    "fine_tune",
    "replace_head",
    "set_frozen",
    "PredictionRecord",
    "read_metrics_csv",
    "read_predictions_csv",
    "write_confusion_csv",
    "write_metrics_csv",
    "write_predictions_csv",
]
