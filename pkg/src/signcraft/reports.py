"""CSV writers and readers for training metrics and evaluation reports.

All files use comma separators, a single header row, ``\n`` line endings,
and exactly one trailing newline. Floats are written with six decimal
places so reruns of a deterministic pipeline produce byte-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .train import EpochMetrics, History

METRICS_HEADER = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"]
PREDICTIONS_HEADER = ["sample", "true", "predicted", "confidence", "correct"]


@dataclass(frozen=True)
class PredictionRecord:
    sample_path: str
    true_label: str
    predicted_label: str
    confidence: float
    correct: bool


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def write_metrics_csv(history: History, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for row in history:
            writer.writerow(
                [
                    row.epoch,
                    _fmt(row.train_loss),
                    _fmt(row.train_acc),
                    _fmt(row.val_loss),
                    _fmt(row.val_acc),
                ]
            )


def read_metrics_csv(path: str | Path) -> History:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != METRICS_HEADER:
        raise FormatError(f"{path}: not a metrics file (bad header)")
    history: History = []
    for raw in rows[1:]:
        if len(raw) != len(METRICS_HEADER):
            raise FormatError(f"{path}: row has {len(raw)} fields, expected {len(METRICS_HEADER)}")
        history.append(
            EpochMetrics(
                epoch=int(raw[0]),
                train_loss=float(raw[1]),
                train_acc=float(raw[2]),
                val_loss=float(raw[3]) if raw[3] else None,
                val_acc=float(raw[4]) if raw[4] else None,
            )
        )
    return history


def write_predictions_csv(records: list[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTIONS_HEADER)
        for rec in records:
            writer.writerow(
                [
                    rec.sample_path,
                    rec.true_label,
                    rec.predicted_label,
                    _fmt(rec.confidence),
                    "true" if rec.correct else "false",
                ]
            )


def read_predictions_csv(path: str | Path) -> list[PredictionRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != PREDICTIONS_HEADER:
        raise FormatError(f"{path}: not a predictions file (bad header)")
    records = []
    for raw in rows[1:]:
        if len(raw) != len(PREDICTIONS_HEADER) or raw[4] not in ("true", "false"):
            raise FormatError(f"{path}: malformed prediction row {raw!r}")
        records.append(
            PredictionRecord(
                sample_path=raw[0],
                true_label=raw[1],
                predicted_label=raw[2],
                confidence=float(raw[3]),
                correct=raw[4] == "true",
            )
        )
    return records


def write_confusion_csv(
    confusion: np.ndarray, class_names: list[str], path: str | Path
) -> None:
    """Square count matrix, rows = true class, columns = predicted class."""
    k = len(class_names)
    if confusion.shape != (k, k):
        raise ValueError(
            f"confusion matrix shape {confusion.shape} does not match {k} classes"
        )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["true_class"] + list(class_names))
        for name, row in zip(class_names, confusion):
            writer.writerow([name] + [int(c) for c in row])
