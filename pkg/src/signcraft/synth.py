"""Deterministic synthetic shape datasets for desk-scale experiments.

Each class is a (shape, color) pair. Images are 48x48 PPM files: uniform
pixel noise with one filled shape whose position and size jitter per image.
Directory names carry a zero-padded class index so byte-wise directory
ordering equals the order classes were requested in.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .rng import Rng

CANVAS = 48
BASE_RADIUS = 14.0

SHAPES = ("circle", "triangle", "square", "octagon", "diamond", "bar")

# regular octagon: apothem/circumradius = cos(pi/8), diagonal cut at sqrt(2)*apothem
_OCT_SIDE = float(np.cos(np.pi / 8.0))
_OCT_DIAG = float(np.sqrt(2.0) * np.cos(np.pi / 8.0))


def _shape_mask(shape: str, cx: float, cy: float, a: float) -> np.ndarray:
    ys, xs = np.mgrid[0:CANVAS, 0:CANVAS]
    dx = xs + 0.5 - cx
    dy = ys + 0.5 - cy
    if shape == "circle":
        return dx * dx + dy * dy <= a * a
    if shape == "square":
        return np.maximum(np.abs(dx), np.abs(dy)) <= a
    if shape == "diamond":
        return np.abs(dx) + np.abs(dy) <= a
    if shape == "octagon":
        return (
            (np.abs(dx) <= _OCT_SIDE * a)
            & (np.abs(dy) <= _OCT_SIDE * a)
            & (np.abs(dx + dy) <= _OCT_DIAG * a)
            & (np.abs(dx - dy) <= _OCT_DIAG * a)
        )
    if shape == "bar":
        return (np.abs(dy) <= a / 3.0) & (np.abs(dx) <= a)
    if shape == "triangle":
        # equilateral, apex up; image y axis points down
        angles = np.deg2rad([90.0, 210.0, 330.0])
        vx = a * np.cos(angles)
        vy = -a * np.sin(angles)
        inside_pos = np.ones_like(dx, dtype=bool)
        inside_neg = np.ones_like(dx, dtype=bool)
        for i in range(3):
            j = (i + 1) % 3
            cross = (vx[j] - vx[i]) * (dy - vy[i]) - (vy[j] - vy[i]) * (dx - vx[i])
            inside_pos &= cross >= 0.0
            inside_neg &= cross <= 0.0
        return inside_pos | inside_neg
    raise ValueError(f"unknown shape {shape!r}; expected one of {SHAPES}")


def render_shape_image(shape: str, color: tuple[int, int, int], rng: Rng) -> bytes:
    """Render one 48x48 RGB image; consumes a fixed number of rng draws."""
    dx = rng.uniform(-4.0, 4.0)
    dy = rng.uniform(-4.0, 4.0)
    scale = rng.uniform(0.85, 1.15)
    noise = rng.uniform_array(CANVAS * CANVAS * 3)
    img = np.floor(noise * 256.0).astype(np.uint8).reshape(CANVAS, CANVAS, 3)
    mask = _shape_mask(shape, CANVAS / 2.0 + dx, CANVAS / 2.0 + dy, BASE_RADIUS * scale)
    img[mask] = np.asarray(color, dtype=np.uint8)
    return img.tobytes()


def synth_generate(
    classes: list[tuple[str, tuple[int, int, int]]],
    per_class: int,
    rng: Rng,
    out_path: str | Path,
) -> list[str]:
    """Write ``per_class`` PPM images for each (shape, color) class.

    Returns the created class directory names, in class-index order. Output
    is a pure function of (classes, per_class, rng seed).
    """
    if per_class < 1:
        raise ValueError(f"per_class must be positive, got {per_class}")
    out_path = Path(out_path)
    out_path.mkdir(parents=True, exist_ok=True)
    dir_names: list[str] = []
    for index, (shape, color) in enumerate(classes):
        if shape not in SHAPES:
            raise ValueError(f"unknown shape {shape!r}; expected one of {SHAPES}")
        if len(color) != 3 or not all(0 <= c <= 255 for c in color):
            raise ValueError(f"color must be three ints in [0, 255], got {color!r}")
        dir_name = f"{index:02d}_{shape}"
        class_dir = out_path / dir_name
        class_dir.mkdir(exist_ok=True)
        header = b"P6\n%d %d\n255\n" % (CANVAS, CANVAS)
        for j in range(per_class):
            pixels = render_shape_image(shape, tuple(color), rng)
            (class_dir / f"{j:04d}.ppm").write_bytes(header + pixels)
        dir_names.append(dir_name)
    return dir_names
