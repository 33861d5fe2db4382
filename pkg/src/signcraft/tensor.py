"""Dense numeric arrays: conventions and constructors.

Tensors are plain numpy arrays in row-major (C) order. Image batches use
NCHW layout throughout the package; no other layout appears at any module
boundary. Default element type is float32; float64 is used only where
numeric tests demand it (finite-difference gradient checks).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ShapeError

Tensor = np.ndarray

DEFAULT_DTYPE = np.float32


def tensor_new(shape: Sequence[int], fill: float = 0.0, dtype=DEFAULT_DTYPE) -> Tensor:
    """Allocate a tensor of the given shape with every element == fill."""
    shape = tuple(shape)
    if len(shape) == 0:
        raise ShapeError("tensor shape must have at least one dimension")
    for dim in shape:
        if not isinstance(dim, (int, np.integer)) or dim < 1:
            raise ShapeError(f"tensor dimensions must be positive integers, got {shape}")
    return np.full(shape, fill, dtype=dtype)
