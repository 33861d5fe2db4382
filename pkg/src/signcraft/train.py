"""Loss, Adam optimizer, and the epoch-driven training/evaluation loop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import EmptyDatasetError, ShapeError
from .model import Model, model_backward, model_forward
from .layers import LayerState
from .rng import Rng, derive_seed
from .tensor import Tensor

# rng stream tags hung off the user seed; see rng.derive_seed
STREAM_SPLIT = 1
STREAM_INIT = 2
STREAM_FIT = 3

_EVAL_BATCH = 64


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 42
    val_fraction: float = 0.2

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1/beta2 must lie in [0, 1)")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float | None
    val_acc: float | None


History = list[EpochMetrics]


def one_hot(label: int, num_classes: int) -> Tensor:
    if not 0 <= label < num_classes:
        raise IndexError(f"label {label} out of range for {num_classes} classes")
    vec = np.zeros(num_classes, dtype=np.float32)
    vec[label] = 1.0
    return vec


def one_hot_batch(labels: np.ndarray, num_classes: int) -> Tensor:
    if len(labels) and (labels.min() < 0 or labels.max() >= num_classes):
        raise IndexError(f"labels out of range for {num_classes} classes")
    out = np.zeros((len(labels), num_classes), dtype=np.float32)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def cross_entropy(probs: Tensor, targets: Tensor) -> tuple[float, Tensor]:
    """Mean categorical cross-entropy and its gradient w.r.t. the logits.

    Probabilities are clamped to >= 1e-12 before the log so a saturated
    softmax cannot produce an infinite loss. The returned gradient is the
    fused softmax+cross-entropy form (p - y) / N.
    """
    if probs.shape != targets.shape:
        raise ShapeError(f"probs shape {probs.shape} != targets shape {targets.shape}")
    n = probs.shape[0]
    picked = np.maximum((probs * targets).sum(axis=1), 1e-12)
    loss = float(-np.log(picked).mean())
    grad = (probs - targets) / probs.dtype.type(n)
    return loss, grad


def adam_step(
    state: LayerState, grads: list[Tensor], t: int, config: TrainConfig
) -> None:
    """One Adam update with bias correction; frozen layers are untouched.

    Arrays are replaced, never mutated in place, so tensors shared with a
    loaded checkpoint stay intact.
    """
    if t < 1:
        raise ValueError(f"Adam step index must be >= 1, got {t}")
    if state.frozen:
        return
    b1, b2, eps, lr = config.beta1, config.beta2, config.epsilon, config.learning_rate
    for i, g in enumerate(grads):
        if g.shape != state.params[i].shape:
            raise ShapeError(
                f"gradient shape {g.shape} != param shape {state.params[i].shape}"
            )
        m = b1 * state.adam_m[i] + (1.0 - b1) * g
        v = b2 * state.adam_v[i] + (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        state.adam_m[i] = m.astype(g.dtype)
        state.adam_v[i] = v.astype(g.dtype)
        state.params[i] = (
            state.params[i] - lr * m_hat / (np.sqrt(v_hat) + eps)
        ).astype(g.dtype)


def _train_step(
    model: Model, images: Tensor, targets: Tensor, config: TrainConfig, rng: Rng
) -> tuple[float, int]:
    """Forward, loss, backward, one optimizer step. Returns (loss, n_correct)."""
    probs, caches = model_forward(model, images, training=True, rng=rng)
    loss, grad_logits = cross_entropy(probs, targets)
    grads = model_backward(model, caches, grad_logits)
    model.step_counter += 1
    for state, layer_grads in zip(model.states, grads):
        if layer_grads is not None:
            adam_step(state, layer_grads, model.step_counter, config)
    correct = int((probs.argmax(axis=1) == targets.argmax(axis=1)).sum())
    return loss, correct


def _eval_pass(
    model: Model, dataset: Dataset, batch_size: int = _EVAL_BATCH
) -> tuple[float, float, np.ndarray, list[tuple[int, int, float]]]:
    """Forward-only pass: (mean loss, accuracy, confusion matrix, per-sample records)."""
    n = len(dataset.labels)
    if n == 0:
        raise EmptyDatasetError("cannot evaluate an empty dataset")
    k = len(dataset.class_names)
    loss_sum = 0.0
    confusion = np.zeros((k, k), dtype=np.int64)
    records: list[tuple[int, int, float]] = []
    for start in range(0, n, batch_size):
        idx = slice(start, min(start + batch_size, n))
        images = dataset.images[idx]
        labels = dataset.labels[idx]
        probs, _ = model_forward(model, images, training=False)
        targets = one_hot_batch(labels, k)
        loss, _ = cross_entropy(probs, targets)
        loss_sum += loss * len(labels)
        preds = probs.argmax(axis=1)
        np.add.at(confusion, (labels, preds), 1)
        conf = probs.max(axis=1)
        records.extend(
            (int(t), int(p), float(c)) for t, p, c in zip(labels, preds, conf)
        )
    correct = int(np.trace(confusion))
    return loss_sum / n, correct / n, confusion, records


def run_epoch(
    model: Model,
    dataset: Dataset,
    config: TrainConfig,
    rng: Rng,
    train: bool,
) -> tuple[float, float]:
    """One pass over the dataset; returns sample-weighted (mean loss, accuracy).

    Train phase shuffles, iterates batches (the last one may be short), and
    applies one optimizer step per batch; the model's step counter carries
    across epochs. Eval phase is forward-only with dropout disabled.
    """
    n = len(dataset.labels)
    if n == 0:
        raise EmptyDatasetError("cannot run an epoch on an empty dataset")
    if not train:
        loss, acc, _, _ = _eval_pass(model, dataset, config.batch_size)
        return loss, acc
    k = len(dataset.class_names)
    order = rng.shuffle_indices(n)
    loss_sum = 0.0
    correct = 0
    for start in range(0, n, config.batch_size):
        batch_idx = order[start : start + config.batch_size]
        images = dataset.images[batch_idx]
        targets = one_hot_batch(dataset.labels[batch_idx], k)
        loss, n_correct = _train_step(model, images, targets, config, rng)
        loss_sum += loss * len(batch_idx)
        correct += n_correct
    return loss_sum / n, correct / n


def fit(
    model: Model,
    train_set: Dataset,
    val_set: Dataset | None,
    config: TrainConfig,
) -> History:
    """Train for config.epochs epochs, evaluating on val_set after each.

    Deterministic: the same model, datasets and config produce bit-identical
    history and final parameters. Returns one EpochMetrics row per epoch;
    val columns are None when val_set is empty or absent.
    """
    fit_rng = Rng(derive_seed(config.seed, STREAM_FIT))
    history: History = []
    has_val = val_set is not None and len(val_set.labels) > 0
    for epoch in range(1, config.epochs + 1):
        epoch_rng = fit_rng.split()
        train_loss, train_acc = run_epoch(model, train_set, config, epoch_rng, train=True)
        if has_val:
            val_loss, val_acc = run_epoch(model, val_set, config, epoch_rng, train=False)
        else:
            val_loss, val_acc = None, None
        history.append(
            EpochMetrics(
                epoch=epoch,
                train_loss=train_loss,
                train_acc=train_acc,
                val_loss=val_loss,
                val_acc=val_acc,
            )
        )
    return history


@dataclass(frozen=True)
class Evaluation:
    loss: float
    accuracy: float
    confusion: np.ndarray  # [K,K], true x predicted
    predictions: list[tuple[int, int, float]]  # (true, predicted, confidence)


def evaluate(model: Model, dataset: Dataset) -> Evaluation:
    """Full forward evaluation with confusion matrix and per-sample records."""
    loss, acc, confusion, records = _eval_pass(model, dataset)
    return Evaluation(loss=loss, accuracy=acc, confusion=confusion, predictions=records)
