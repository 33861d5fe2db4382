"""Command-line interface: train, finetune, evaluate, predict, summary.

Exit codes: 0 success, 2 user-input problems (missing paths, unreadable
files, bad flag values, mismatched class names), 1 anything unexpected.
Every command is deterministic given identical flags and inputs; the seed
in play is printed at startup so a run can be reproduced from its log.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np
import threadpoolctl

from .checkpoint import load_checkpoint, save_checkpoint
from .data import load_directory_dataset, decode_ppm, normalize, resize_bilinear, stratified_split
from .data import IMAGE_SIZE
from .errors import EmptyDatasetError, SigncraftError
from .model import canonical_spec, format_summary, init_model, model_forward, model_summary
from .reports import (
    PredictionRecord,
    write_confusion_csv,
    write_metrics_csv,
    write_predictions_csv,
)
from .rng import Rng, derive_seed
from .train import STREAM_INIT, STREAM_SPLIT, TrainConfig, evaluate, fit
from .transfer import fine_tune

_thread_limiter = None  # keeps the threadpoolctl limit alive for the process


def _apply_thread_cap() -> None:
    global _thread_limiter
    raw = os.environ.get("SIGNCRAFT_THREADS", "").strip()
    if not raw:
        return
    try:
        cap = int(raw)
    except ValueError:
        print(f"warning: ignoring SIGNCRAFT_THREADS={raw!r} (not an integer)", file=sys.stderr)
        return
    if cap > 0:
        _thread_limiter = threadpoolctl.threadpool_limits(limits=cap)


def _config_from_args(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
        val_fraction=args.val_fraction,
    )


def _load_nonempty(path: str):
    ds = load_directory_dataset(path)
    if len(ds) == 0:
        raise EmptyDatasetError(f"no .ppm images found under {path}")
    return ds


def _print_history(history) -> None:
    for row in history:
        line = (
            f"epoch {row.epoch} "
            f"train_loss {row.train_loss:.6f} train_acc {row.train_acc:.6f}"
        )
        if row.val_loss is not None:
            line += f" val_loss {row.val_loss:.6f} val_acc {row.val_acc:.6f}"
        print(line)


def cmd_train(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    print(f"seed: {config.seed}")
    ds = _load_nonempty(args.data)
    split_rng = Rng(derive_seed(config.seed, STREAM_SPLIT))
    train_set, val_set = stratified_split(ds, config.val_fraction, split_rng)
    spec = canonical_spec(len(ds.class_names))
    model = init_model(spec, Rng(derive_seed(config.seed, STREAM_INIT)))
    history = fit(model, train_set, val_set, config)
    _print_history(history)
    save_checkpoint(model, ds.class_names, args.out)
    print(f"saved checkpoint: {args.out}")
    if args.metrics:
        write_metrics_csv(history, args.metrics)
        print(f"saved metrics: {args.metrics}")
    return 0


def cmd_finetune(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    print(f"seed: {config.seed}")
    ds = _load_nonempty(args.data)
    history, model = fine_tune(
        args.base, ds, config, freeze=args.freeze, out_path=args.out
    )
    summary = model_summary(model.spec, model.states)
    print(f"trainable params: {summary.trainable_params} of {summary.total_params}")
    _print_history(history)
    print(f"saved checkpoint: {args.out}")
    if args.metrics:
        write_metrics_csv(history, args.metrics)
        print(f"saved metrics: {args.metrics}")
    return 0


def _class_name_diff(ckpt_names: list[str], data_names: list[str]) -> str | None:
    if ckpt_names == data_names:
        return None
    missing = sorted(set(ckpt_names) - set(data_names))
    extra = sorted(set(data_names) - set(ckpt_names))
    parts = ["checkpoint and dataset class names disagree"]
    if missing:
        parts.append(f"only in checkpoint: {', '.join(missing)}")
    if extra:
        parts.append(f"only in dataset: {', '.join(extra)}")
    if not missing and not extra:
        parts.append(f"same names, different order: {ckpt_names} vs {data_names}")
    return "; ".join(parts)


def cmd_evaluate(args: argparse.Namespace) -> int:
    model, ckpt_names = load_checkpoint(args.model)
    ds = _load_nonempty(args.data)
    diff = _class_name_diff(ckpt_names, ds.class_names)
    if diff is not None:
        raise SigncraftError(diff)
    result = evaluate(model, ds)
    print(f"loss: {result.loss:.6f}")
    print(f"accuracy: {result.accuracy:.6f}")
    if args.report:
        confusion_path = f"{args.report}_confusion.csv"
        predictions_path = f"{args.report}_predictions.csv"
        write_confusion_csv(result.confusion, ds.class_names, confusion_path)
        records = [
            PredictionRecord(
                sample_path=ds.paths[i] if ds.paths else f"sample{i}",
                true_label=ds.class_names[true],
                predicted_label=ds.class_names[pred],
                confidence=conf,
                correct=true == pred,
            )
            for i, (true, pred, conf) in enumerate(result.predictions)
        ]
        write_predictions_csv(records, predictions_path)
        print(f"saved report: {confusion_path}, {predictions_path}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    if args.top_k < 1:
        raise ValueError(f"--top-k must be at least 1, got {args.top_k}")
    model, class_names = load_checkpoint(args.model)
    raw = decode_ppm(Path(args.image).read_bytes())
    if (raw.width, raw.height) != (IMAGE_SIZE, IMAGE_SIZE):
        raw = resize_bilinear(raw)
    batch = normalize(raw)[None, ...]
    probs, _ = model_forward(model, batch, training=False)
    row = probs[0]
    k = min(args.top_k, len(class_names))
    order = np.argsort(-row, kind="stable")[:k]
    width = max(len(class_names[i]) for i in order)
    for idx in order:
        print(f"{class_names[idx]:<{width}}  {row[idx]:.6f}")
    return 0


def cmd_summary(args: argparse.Namespace) -> int:
    if args.model:
        model, _names = load_checkpoint(args.model)
        summary = model_summary(model.spec, model.states)
    else:
        k = args.arch_for_classes
        if k < 1:
            raise ValueError(f"--arch-for-classes needs a positive count, got {k}")
        summary = model_summary(canonical_spec(k))
    print(format_summary(summary))
    return 0


def _add_training_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--data", required=True, help="dataset directory (class subdirs of .ppm files)")
    sp.add_argument("--epochs", type=int, default=30)
    sp.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    sp.add_argument("--lr", type=float, default=0.001)
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--val-fraction", dest="val_fraction", type=float, default=0.2)
    sp.add_argument("--out", required=True, help="checkpoint file to write")
    sp.add_argument("--metrics", default=None, help="per-epoch metrics CSV to write")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signcraft",
        description="Train, fine-tune, and evaluate small image classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", help="train the standard architecture from scratch")
    _add_training_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("finetune", help="retarget a trained checkpoint to a new dataset")
    _add_training_flags(sp)
    sp.add_argument("--base", required=True, help="checkpoint to start from")
    sp.add_argument("--freeze", choices=("none", "conv"), default="none")
    sp.set_defaults(func=cmd_finetune)

    sp = sub.add_parser("evaluate", help="measure loss/accuracy on a labeled directory")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--report", default=None, help="prefix for confusion/prediction CSVs")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("predict", help="classify a single image")
    sp.add_argument("--model", required=True)
    sp.add_argument("--image", required=True)
    sp.add_argument("--top-k", dest="top_k", type=int, default=3)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("summary", help="print the layer/parameter table")
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", default=None)
    group.add_argument("--arch-for-classes", dest="arch_for_classes", type=int, default=None)
    sp.set_defaults(func=cmd_summary)

    return parser


def main(argv: list[str] | None = None) -> int:
    _apply_thread_cap()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SigncraftError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
