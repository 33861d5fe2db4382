"""Shipping acceptance checks, one test per numbered criterion.

The terminal summary (see conftest) prints a PASS/FAIL line per criterion.
Criteria 3/4/6 exercise the real CLI on synthetic corpora generated at
session start; everything runs on a laptop-class CPU in about a minute,
except the optional large-dataset check which is skipped unless
SIGNCRAFT_GTSRB_DIR points at a prepared directory tree.
"""

import math
import os
import struct
import time
import zlib

import numpy as np
import pytest

from signcraft import (
    Conv2D,
    CorruptCheckpointError,
    Dataset,
    Dense,
    Flatten,
    FormatError,
    MaxPool2x2,
    Model,
    ModelSpec,
    ReLU,
    Rng,
    Softmax,
    TrainConfig,
    canonical_spec,
    cross_entropy,
    init_model,
    load_checkpoint,
    one_hot_batch,
    read_metrics_csv,
    run_epoch,
    save_checkpoint,
    synth_generate,
)
from signcraft.cli import main
from signcraft.layers import (
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    maxpool2x2_backward,
    maxpool2x2_forward,
    relu_backward,
    relu_forward,
    softmax,
)

from util import fd_gradient, max_rel_err, naive_conv2d, rand_array

# Muted palettes (offsets around the noise mean) keep the tasks honest:
# domain B is solvable but not trivial for ten optimizer steps, which is
# what makes the transfer comparison in criterion 4 informative.
DOMAIN_A = [
    ("circle", (172, 82, 82)),
    ("triangle", (82, 172, 82)),
    ("square", (82, 82, 172)),
    ("octagon", (172, 172, 82)),
    ("diamond", (172, 82, 172)),
    ("bar", (82, 172, 172)),
]
# disjoint (shape, color) pairs at half the contrast, same hue axes
DOMAIN_B = [
    ("triangle", (147, 107, 107)),
    ("square", (107, 147, 107)),
    ("octagon", (107, 107, 147)),
    ("bar", (147, 147, 107)),
]

# Final metrics row of the first green run of criterion 3 on this setup;
# any later drift in the training pipeline must show up here.
PINNED_FINAL_ROW = "30,0.003328,1.000000,0.000004,1.000000"


def _randint(rng, lo, hi):
    return lo + int(rng.uniform(0, hi - lo + 1))


def _cli(args):
    assert main([str(a) for a in args]) == 0


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    synth_generate(DOMAIN_A, 50, Rng(7), root / "domain_a")
    synth_generate(DOMAIN_B, 10, Rng(14), root / "domain_b")
    return root


@pytest.fixture(scope="module")
def pretrained(corpus):
    """The criterion-3 training run, shared as the criterion-4/6 base."""
    out = corpus / "first"
    out.mkdir()
    start = time.monotonic()
    _cli(
        [
            "train",
            "--data", corpus / "domain_a",
            "--out", out / "model.ckpt",
            "--metrics", out / "metrics.csv",
        ]
    )
    seconds = time.monotonic() - start
    return {
        "ckpt": out / "model.ckpt",
        "csv": out / "metrics.csv",
        "seconds": seconds,
    }


# ---------------------------------------------------------------------------
# 1. analytic gradients vs central finite differences


def test_criterion_1_gradient_checks():
    start = time.monotonic()
    tol = 1e-4
    worst = {}

    def record(kind, *errs):
        worst[kind] = max(worst.get(kind, 0.0), *errs)

    for i in range(20):
        rng = Rng(910 + i)
        n, c, f = _randint(rng, 1, 2), _randint(rng, 1, 3), _randint(rng, 1, 4)
        h, w_ = _randint(rng, 3, 7), _randint(rng, 3, 7)
        kh, kw = _randint(rng, 1, min(3, h)), _randint(rng, 1, min(3, w_))
        x = rand_array(rng, (n, c, h, w_))
        w = rand_array(rng, (f, c, kh, kw), -0.5, 0.5)
        b = rand_array(rng, (f,), -0.5, 0.5)
        proj = rand_array(rng, conv2d_forward(x, w, b).shape)

        def loss():
            return float(np.sum(conv2d_forward(x, w, b) * proj))

        dx, dw, db = conv2d_backward(x, w, proj)
        record(
            "conv2d",
            max_rel_err(dx, fd_gradient(loss, x)),
            max_rel_err(dw, fd_gradient(loss, w)),
            max_rel_err(db, fd_gradient(loss, b)),
        )

    for i in range(20):
        rng = Rng(930 + i)
        n, fin, fout = _randint(rng, 1, 4), _randint(rng, 1, 10), _randint(rng, 1, 6)
        x = rand_array(rng, (n, fin))
        w = rand_array(rng, (fin, fout), -0.5, 0.5)
        b = rand_array(rng, (fout,), -0.5, 0.5)
        proj = rand_array(rng, (n, fout))

        def loss():
            return float(np.sum(dense_forward(x, w, b) * proj))

        dx, dw, db = dense_backward(x, w, proj)
        record(
            "dense",
            max_rel_err(dx, fd_gradient(loss, x)),
            max_rel_err(dw, fd_gradient(loss, w)),
            max_rel_err(db, fd_gradient(loss, b)),
        )

    for i in range(20):
        rng = Rng(950 + i)
        shape = (_randint(rng, 1, 3), _randint(rng, 2, 12))
        # keep every activation a safe distance from the kink at zero
        mag = rand_array(rng, shape, 0.05, 1.0)
        sign = np.where(rand_array(rng, shape) < 0, -1.0, 1.0)
        x = mag * sign
        proj = rand_array(rng, shape)

        def loss():
            return float(np.sum(relu_forward(x) * proj))

        record("relu", max_rel_err(relu_backward(x, proj), fd_gradient(loss, x)))

    for i in range(20):
        rng = Rng(970 + i)
        shape = (
            _randint(rng, 1, 2),
            _randint(rng, 1, 3),
            2 * _randint(rng, 1, 4),
            2 * _randint(rng, 1, 4),
        )
        x = None
        for _ in range(60):  # reject windows with near-ties at the max
            cand = rand_array(rng, shape)
            n, c, h, w_ = shape
            quads = (
                cand.reshape(n, c, h // 2, 2, w_ // 2, 2)
                .transpose(0, 1, 2, 4, 3, 5)
                .reshape(n, c, h // 2, w_ // 2, 4)
            )
            top2 = np.sort(quads, axis=-1)[..., -2:]
            if (top2[..., 1] - top2[..., 0]).min() > 1e-3:
                x = cand
                break
        assert x is not None
        out, argmax = maxpool2x2_forward(x)
        proj = rand_array(rng, out.shape)

        def loss():
            return float(np.sum(maxpool2x2_forward(x)[0] * proj))

        dx = maxpool2x2_backward(argmax, x.shape, proj)
        record("maxpool", max_rel_err(dx, fd_gradient(loss, x)))

    for i in range(20):
        rng = Rng(990 + i)
        n, k = _randint(rng, 1, 5), _randint(rng, 2, 7)
        logits = rand_array(rng, (n, k), -2.0, 2.0)
        labels = np.array([_randint(rng, 0, k - 1) for _ in range(n)])
        targets = one_hot_batch(labels, k).astype(np.float64)

        def loss():
            return cross_entropy(softmax(logits), targets)[0]

        _, grad = cross_entropy(softmax(logits), targets)
        record("softmax_ce", max_rel_err(grad, fd_gradient(loss, logits)))

    elapsed = time.monotonic() - start
    assert set(worst) == {"conv2d", "dense", "relu", "maxpool", "softmax_ce"}
    for kind, err in worst.items():
        assert err < tol, f"{kind}: max rel err {err:.3g} >= {tol}"
    assert elapsed < 120, f"gradient checks took {elapsed:.1f}s"


# ---------------------------------------------------------------------------
# 2. vectorized convolution vs the naive direct form


def test_criterion_2_convolution_oracle():
    worst = 0.0
    for i in range(100):
        rng = Rng(20_000 + i)
        n, c = _randint(rng, 1, 2), _randint(rng, 1, 4)
        h, w_ = _randint(rng, 1, 16), _randint(rng, 1, 16)
        f = _randint(rng, 1, 8)
        kh, kw = _randint(rng, 1, min(4, h)), _randint(rng, 1, min(4, w_))
        x = rand_array(rng, (n, c, h, w_))
        w = rand_array(rng, (f, c, kh, kw))
        b = rand_array(rng, (f,))
        got = conv2d_forward(x, w, b)
        want = naive_conv2d(x, w, b)
        assert got.shape == want.shape
        worst = max(worst, float(np.max(np.abs(got - want))) if got.size else 0.0)
    assert worst < 1e-6, f"max abs deviation {worst:.3g}"


# ---------------------------------------------------------------------------
# 3. end-to-end training on the six-class synthetic corpus


def test_criterion_3_synthetic_training(pretrained):
    rows = read_metrics_csv(pretrained["csv"])
    assert len(rows) == 30
    assert rows[-1].val_acc is not None and rows[-1].val_acc >= 0.95
    assert pretrained["seconds"] < 300, f"training took {pretrained['seconds']:.0f}s"
    final = pretrained["csv"].read_text().splitlines()[-1]
    assert final == PINNED_FINAL_ROW, f"pinned result drifted: {final}"


# ---------------------------------------------------------------------------
# 4. fine-tuning beats training from scratch on the small disjoint domain


def test_criterion_4_transfer_beats_scratch(corpus, pretrained, tmp_path):
    scratch, tuned = [], []
    for seed in (1, 2, 3, 4, 5):
        _cli(
            [
                "train",
                "--data", corpus / "domain_b",
                "--epochs", 10,
                "--seed", seed,
                "--out", tmp_path / f"scratch_{seed}.ckpt",
                "--metrics", tmp_path / f"scratch_{seed}.csv",
            ]
        )
        scratch.append(read_metrics_csv(tmp_path / f"scratch_{seed}.csv")[-1].val_acc)
        _cli(
            [
                "finetune",
                "--base", pretrained["ckpt"],
                "--data", corpus / "domain_b",
                "--epochs", 10,
                "--seed", seed,
                "--out", tmp_path / f"tuned_{seed}.ckpt",
                "--metrics", tmp_path / f"tuned_{seed}.csv",
            ]
        )
        tuned.append(read_metrics_csv(tmp_path / f"tuned_{seed}.csv")[-1].val_acc)

    mean_scratch = sum(scratch) / len(scratch)
    mean_tuned = sum(tuned) / len(tuned)
    assert mean_tuned >= mean_scratch, (
        f"fine-tuned mean {mean_tuned:.3f} (runs {tuned}) fell below "
        f"from-scratch mean {mean_scratch:.3f} (runs {scratch})"
    )


# ---------------------------------------------------------------------------
# 5. published parameter counts for the canonical architecture


def test_criterion_5_parameter_anchors(capsys):
    assert main(["summary", "--arch-for-classes", "37"]) == 0
    lines = capsys.readouterr().out.splitlines()
    conv = [int(l.split()[-1]) for l in lines if l.startswith("conv2d")]
    assert conv == [896, 18496]
    for prefix in ("maxpool2x2", "dropout", "flatten"):
        rows = [l for l in lines if l.startswith(prefix)]
        assert rows and all(l.split()[-1] == "0" for l in rows)


# ---------------------------------------------------------------------------
# 6. byte-identical artifacts across reruns


def test_criterion_6_rerun_determinism(corpus, pretrained, tmp_path):
    _cli(
        [
            "train",
            "--data", corpus / "domain_a",
            "--out", tmp_path / "model.ckpt",
            "--metrics", tmp_path / "metrics.csv",
        ]
    )
    assert (tmp_path / "model.ckpt").read_bytes() == pretrained["ckpt"].read_bytes()
    assert (tmp_path / "metrics.csv").read_bytes() == pretrained["csv"].read_bytes()

    for run in ("a", "b"):
        _cli(
            [
                "finetune",
                "--base", pretrained["ckpt"],
                "--data", corpus / "domain_b",
                "--epochs", 5,
                "--out", tmp_path / f"ft_{run}.ckpt",
                "--metrics", tmp_path / f"ft_{run}.csv",
            ]
        )
    assert (tmp_path / "ft_a.ckpt").read_bytes() == (tmp_path / "ft_b.ckpt").read_bytes()
    assert (tmp_path / "ft_a.csv").read_bytes() == (tmp_path / "ft_b.csv").read_bytes()


# ---------------------------------------------------------------------------
# 7. checkpoint roundtrip and corruption detection


def test_criterion_7_checkpoint_integrity(tmp_path):
    spec = canonical_spec(3, input_shape=(3, 12, 12))
    model = init_model(spec, Rng(700))
    rng = Rng(701)
    for state in model.states:
        state.adam_m = [rand_array(rng, p.shape, -0.1, 0.1).astype(np.float32) for p in state.params]
        state.adam_v = [rand_array(rng, p.shape, 0.0, 0.01).astype(np.float32) for p in state.params]
    model = Model(spec=spec, states=model.states, step_counter=9)
    names = ["one", "two", "three"]

    first = tmp_path / "a.ckpt"
    second = tmp_path / "b.ckpt"
    save_checkpoint(model, names, first)
    loaded, loaded_names = load_checkpoint(first)
    save_checkpoint(loaded, loaded_names, second)
    assert first.read_bytes() == second.read_bytes()

    data = first.read_bytes()
    bad = tmp_path / "bad.ckpt"

    mangled = bytearray(data)
    mangled[0] ^= 0xFF
    bad.write_bytes(bytes(mangled))
    with pytest.raises(FormatError):
        load_checkpoint(bad)

    bad.write_bytes(data[: len(data) // 2])
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(bad)

    mangled = bytearray(data)
    mangled[-50] ^= 0x01  # payload bit flip caught by the checksum
    bad.write_bytes(bytes(mangled))
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(bad)

    # declared tensor shape disagrees with the architecture; checksum valid
    header_len = struct.unpack_from("<I", data, 12)[0]
    header = bytearray(data[16 : 16 + header_len])
    marker = b'"layer0.weight",['
    pos = header.index(marker) + len(marker)
    assert header[pos : pos + 2] == b"32"  # canonical first-conv filter count
    header[pos : pos + 2] = b"99"
    body = data[:12] + struct.pack("<I", len(header)) + bytes(header) + data[16 + header_len : -4]
    bad.write_bytes(body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(bad)


# ---------------------------------------------------------------------------
# 8. loss analytics


def test_criterion_8_loss_analytics():
    for k in (2, 37, 43):
        probs = np.full((k, k), 1.0 / k)
        targets = one_hot_batch(np.arange(k), k).astype(np.float64)
        loss, _ = cross_entropy(probs, targets)
        assert abs(loss - math.log(k)) < 1e-9

    # a healthy optimizer memorizes one batch almost immediately
    spec = ModelSpec(
        input_shape=(3, 32, 32),
        layers=(
            Conv2D(3, 8),
            ReLU(),
            MaxPool2x2(),
            Conv2D(8, 16),
            ReLU(),
            MaxPool2x2(),
            Flatten(),
            Dense(16 * 6 * 6, 32),
            ReLU(),
            Dense(32, 4),
            Softmax(),
        ),
        class_count=4,
    )
    model = init_model(spec, Rng(800))
    batch = Dataset(
        images=rand_array(Rng(801), (8, 3, 32, 32)).astype(np.float32),
        labels=np.arange(8, dtype=np.int64) % 4,
        class_names=[f"c{i}" for i in range(4)],
    )
    config = TrainConfig(epochs=1, batch_size=8, learning_rate=0.01, seed=1, val_fraction=0.0)
    rng = Rng(802)
    loss = math.inf
    steps = 0
    while steps < 200 and loss >= 0.05:
        run_epoch(model, batch, config, rng.split(), train=True)
        steps += 1
        loss, _ = run_epoch(model, batch, config, Rng(0), train=False)
    assert loss < 0.05, f"loss still {loss:.4f} after {steps} steps"


# ---------------------------------------------------------------------------
# 9. optional large-dataset check (not CI-gating)

GTSRB_DIR = os.environ.get("SIGNCRAFT_GTSRB_DIR", "")


@pytest.mark.skipif(
    not GTSRB_DIR,
    reason="set SIGNCRAFT_GTSRB_DIR to a 43-class directory tree to enable",
)
def test_criterion_9_gtsrb_accuracy(tmp_path):
    start = time.monotonic()
    _cli(
        [
            "train",
            "--data", GTSRB_DIR,
            "--out", tmp_path / "gtsrb.ckpt",
            "--metrics", tmp_path / "gtsrb.csv",
        ]
    )
    rows = read_metrics_csv(tmp_path / "gtsrb.csv")
    assert rows[-1].val_acc is not None and rows[-1].val_acc >= 0.90
    print(f"gtsrb: val_acc {rows[-1].val_acc:.4f} in {time.monotonic() - start:.0f}s")
