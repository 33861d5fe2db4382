"""Image decoding, resizing, normalization, and directory-based datasets.

The on-disk dataset layout is ``<root>/<class_name>/<file>.ppm`` with binary
PPM (P6, maxval 255) images. Class indices are the rank of each directory
name under ascending byte-wise lexicographic sort, so the label space is a
pure function of the set of directory names.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CorruptFileError,
    EmptyDatasetError,
    FormatError,
    UnsupportedFormatError,
)
from .rng import Rng
from .tensor import Tensor

IMAGE_SIZE = 32
NORMALIZATION_ID = "rgb-pm1"  # (v/255 - 0.5)/0.5 per channel, RGB plane order


@dataclass(frozen=True)
class RawImage:
    width: int
    height: int
    pixels: bytes  # RGB triples, row-major, 3*width*height bytes

    def __post_init__(self):
        if len(self.pixels) != 3 * self.width * self.height:
            raise CorruptFileError(
                f"pixel buffer holds {len(self.pixels)} bytes, "
                f"expected {3 * self.width * self.height}"
            )


@dataclass
class Dataset:
    images: Tensor  # [N,3,32,32] float32, normalized
    labels: np.ndarray  # [N] int64, each in [0, len(class_names))
    class_names: list[str]
    source: str = ""
    paths: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.labels)


# ---------------------------------------------------------------------------
# PPM decoding

def decode_ppm(data: bytes) -> RawImage:
    """Decode a binary PPM (P6) byte stream.

    Header tokens may be separated by any whitespace and interleaved with
    ``#`` comments; maxval must be 255; the payload must hold exactly
    3*width*height bytes after the single whitespace ending the header.
    """
    if not data.startswith(b"P6"):
        raise FormatError("not a binary PPM stream (magic != P6)")
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        # skip whitespace and comment lines
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PPM header")
        token = data[start:pos]
        if not token.isdigit():
            raise FormatError(f"non-numeric PPM header token {token!r}")
        tokens.append(int(token))
    width, height, maxval = tokens
    if width < 1 or height < 1:
        raise FormatError(f"invalid PPM dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedFormatError(f"only maxval 255 is supported, got {maxval}")
    pos += 1  # exactly one whitespace byte separates header from pixels
    need = 3 * width * height
    pixels = data[pos : pos + need]
    if len(pixels) < need:
        raise CorruptFileError(
            f"PPM pixel data truncated: have {len(pixels)} of {need} bytes"
        )
    return RawImage(width=width, height=height, pixels=pixels)


def encode_ppm(img: RawImage) -> bytes:
    return b"P6\n%d %d\n255\n" % (img.width, img.height) + img.pixels


# ---------------------------------------------------------------------------
# resize + normalize

def resize_bilinear(img: RawImage, out_w: int = IMAGE_SIZE, out_h: int = IMAGE_SIZE) -> RawImage:
    """Bilinear resample with half-pixel centers.

    Source coordinate for destination pixel d is (d + 0.5)*scale - 0.5,
    clamped to the source grid, so a same-size resize is the exact identity.
    """
    src = np.frombuffer(img.pixels, dtype=np.uint8).reshape(img.height, img.width, 3)
    src = src.astype(np.float64)

    def axis_coords(out_n: int, in_n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pos = (np.arange(out_n) + 0.5) * (in_n / out_n) - 0.5
        pos = np.clip(pos, 0.0, in_n - 1.0)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, in_n - 1)
        return lo, hi, pos - lo

    y0, y1, wy = axis_coords(out_h, img.height)
    x0, x1, wx = axis_coords(out_w, img.width)
    wy = wy[:, None, None]
    wx = wx[None, :, None]
    top = src[np.ix_(y0, x0)] * (1 - wx) + src[np.ix_(y0, x1)] * wx
    bot = src[np.ix_(y1, x0)] * (1 - wx) + src[np.ix_(y1, x1)] * wx
    out = top * (1 - wy) + bot * wy
    quantized = np.floor(out + 0.5).astype(np.uint8)
    return RawImage(width=out_w, height=out_h, pixels=quantized.tobytes())


def normalize(img: RawImage) -> Tensor:
    """Map a 32x32 RGB image to a [3,32,32] float32 tensor in [-1, 1]."""
    if img.width != IMAGE_SIZE or img.height != IMAGE_SIZE:
        raise ValueError(
            f"normalize expects a {IMAGE_SIZE}x{IMAGE_SIZE} image, "
            f"got {img.width}x{img.height}"
        )
    arr = np.frombuffer(img.pixels, dtype=np.uint8).reshape(IMAGE_SIZE, IMAGE_SIZE, 3)
    planes = arr.transpose(2, 0, 1).astype(np.float32)
    return (planes / np.float32(255.0) - np.float32(0.5)) / np.float32(0.5)


# ---------------------------------------------------------------------------
# directory loading

def _byte_sorted(names: list[str]) -> list[str]:
    return sorted(names, key=lambda s: s.encode("utf-8"))


def load_directory_dataset(root: str | Path) -> Dataset:
    """Load ``<root>/<class>/<file>.ppm`` into a normalized Dataset.

    Class index = rank of the directory name in ascending byte-wise sort;
    files are processed in lexicographic filename order. Classes with no
    images are kept in class_names with zero samples. Any undecodable .ppm
    aborts the load (skipping would silently shift per-class counts).
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root is not a directory: {root}")
    class_dirs = _byte_sorted([p.name for p in root.iterdir() if p.is_dir()])
    if not class_dirs:
        raise EmptyDatasetError(f"no class subdirectories under {root}")
    images: list[Tensor] = []
    labels: list[int] = []
    paths: list[str] = []
    for label, name in enumerate(class_dirs):
        files = _byte_sorted(
            [p.name for p in (root / name).iterdir() if p.is_file() and p.suffix == ".ppm"]
        )
        for fname in files:
            path = root / name / fname
            try:
                raw = decode_ppm(path.read_bytes())
            except (FormatError, CorruptFileError) as exc:
                raise type(exc)(f"{path}: {exc}") from exc
            resized = raw if (raw.width, raw.height) == (IMAGE_SIZE, IMAGE_SIZE) else resize_bilinear(raw)
            images.append(normalize(resized))
            labels.append(label)
            paths.append(str(path))
    stacked = (
        np.stack(images)
        if images
        else np.empty((0, 3, IMAGE_SIZE, IMAGE_SIZE), dtype=np.float32)
    )
    return Dataset(
        images=stacked,
        labels=np.asarray(labels, dtype=np.int64),
        class_names=class_dirs,
        source=str(root),
        paths=paths,
    )


# ---------------------------------------------------------------------------
# splitting

def stratified_split(
    ds: Dataset, val_fraction: float, rng: Rng
) -> tuple[Dataset, Dataset]:
    """Per-class split into (train, val) using a seeded shuffle per class.

    Each class contributes round(n * val_fraction) samples to val, capped at
    n - 1 so every class keeps at least one training sample; single-sample
    classes contribute nothing to val and trigger a warning. Both outputs
    share class_names.
    """
    if not 0.0 <= val_fraction < 1.0:
        raise ValueError(f"val_fraction must lie in [0, 1), got {val_fraction}")
    train_idx: list[int] = []
    val_idx: list[int] = []
    for label in range(len(ds.class_names)):
        members = np.flatnonzero(ds.labels == label)
        n = len(members)
        if n == 0:
            continue
        n_val = int(np.floor(n * val_fraction + 0.5))
        n_val = min(n_val, n - 1)
        if n == 1 and val_fraction > 0.0:
            warnings.warn(
                f"class {ds.class_names[label]!r} has a single sample; "
                "it stays in the training split",
                stacklevel=2,
            )
        order = rng.shuffle_indices(n)
        chosen = sorted(int(members[i]) for i in order[:n_val])
        rest = sorted(int(members[i]) for i in order[n_val:])
        val_idx.extend(chosen)
        train_idx.extend(rest)
    train_idx.sort()
    val_idx.sort()

    def subset(indices: list[int], tag: str) -> Dataset:
        return Dataset(
            images=ds.images[indices],
            labels=ds.labels[indices],
            class_names=ds.class_names,
            source=f"{ds.source}[{tag}]" if ds.source else tag,
            paths=[ds.paths[i] for i in indices] if ds.paths else [],
        )

    return subset(train_idx, "train"), subset(val_idx, "val")
