"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; the end-to-end pipeline criterion takes the longest (well under its
ten-minute budget on a laptop CPU).
"""

import functools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from lesionkit.catalog import scan_dataset
from lesionkit.cli import run_pipeline
from lesionkit.config import config_from_dict
from lesionkit.dedup import add_hashes, compute_dhash, deduplicate
from lesionkit.metrics import compute_metrics, confusion_from_log
from lesionkit.partition import (TRAINVAL, stratified_holdout,
                                 stratified_kfold, verify_partition)
from lesionkit.refmodel import (AdaMaxState, LinearHead, PredictionRow,
                                adamax_step, loss_and_grad)
from lesionkit.synth import generate_corpus
from lesionkit.trainctl import EarlyStopper, PlateauScheduler
from conftest import make_manifest
from test_dedup import TWO_TONE_GOLDEN, oracle_dhash, two_tone_16x16
from test_metrics import brute_force_metrics
from test_refmodel import finite_difference_grads


def criterion(name, budget_s):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.monotonic()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[ACCEPTANCE] {name}: FAIL")
                raise
            elapsed = time.monotonic() - start
            print(f"[ACCEPTANCE] {name}: PASS ({elapsed:.2f}s, "
                  f"budget {budget_s}s)")
            assert elapsed < budget_s, f"over runtime budget: {elapsed:.1f}s"
        return wrapper
    return deco


@criterion("dHash golden vectors", 1)
def test_dhash_golden_vectors():
    assert compute_dhash(np.full((20, 20), 128, np.uint8)) == 0
    row = np.arange(255, 255 - 18 * 10, -10, dtype=float).clip(0, 255)
    assert compute_dhash(np.tile(row, (12, 1)).astype(np.uint8)) \
        == 0xFFFFFFFFFFFFFFFF
    img = two_tone_16x16()
    assert oracle_dhash(img) == TWO_TONE_GOLDEN
    assert compute_dhash(img) == TWO_TONE_GOLDEN


@criterion("dedup count identity (3957 - 114 duplicates = 3843)", 30)
def test_dedup_count_identity(tmp_path):
    counts = {"dermatitis": 900, "psoriasis": 800, "lichen_planus": 600,
              "pityriasis_rosea": 481, "healthy": 1062}
    assert sum(counts.values()) == 3843
    root = tmp_path / "corpus"
    class_map = generate_corpus(root, counts, seed=2026, duplicates=114,
                                size=16, noise_amp=220.0)
    m = scan_dataset(root, class_map, created="t0")
    assert len(m.records) == 3957
    add_hashes(m, root=root)
    kept, removed = deduplicate(m, threshold=0)
    assert len(kept.records) == 3843
    assert len(removed) == 114


@criterion("partition invariants over 100 random (manifest, seed) pairs", 10)
def test_partition_invariants():
    rng = np.random.Generator(np.random.PCG64(99))
    for trial in range(100):
        n_classes = int(rng.integers(2, 7))
        counts = {f"cls{i}": int(rng.integers(12, 60))
                  for i in range(n_classes)}
        m = make_manifest(counts)
        fraction = round(float(rng.uniform(0.1, 0.35)), 3)
        seed = int(rng.integers(0, 1 << 62))
        split = stratified_holdout(m, fraction, seed)
        folds = stratified_kfold(m, 5, seed,
                                 include=set(split.subset_ids(TRAINVAL)))
        assert verify_partition(m, split, folds) == [], f"trial {trial}"
        # holdout counts per the rounding rule, recomputed independently
        for cls, n in counts.items():
            want = min(max(math.floor(n * fraction + 0.5), 1), n - 1)
            got = sum(1 for rid, s in split.assignment.items()
                      if s == "test" and rid.startswith(cls + "-"))
            assert got == want


@criterion("scheduler/stopper golden traces", 1)
def test_control_golden_traces():
    # LR reduction on the 3rd consecutive bad epoch, by the factor 1e-3
    s = PlateauScheduler(lr=1e-3, factor=1e-3, patience=3)
    trace = []
    for loss in [0.5, 0.6, 0.6, 0.6, 0.4, 0.5, 0.5, 0.5]:
        reduced = s.step(loss)
        trace.append((reduced, s.lr, s.bad_epochs))
    assert trace == [
        (False, 1e-3, 0), (False, 1e-3, 1), (False, 1e-3, 2),
        (True, 1e-6, 0),                       # reduction fires at epoch 4
        (False, 1e-6, 0),                      # improvement resets
        (False, 1e-6, 1), (False, 1e-6, 2),
        (True, 1e-9, 0),                       # second reduction composes
    ]
    # stop on the 7th consecutive bad epoch; improvement resets the counter
    e = EarlyStopper(patience=7)
    accs = [0.9] + [0.85] * 6 + [0.95] + [0.9] * 7
    fired = [e.step(a) for a in accs]
    assert fired == [False] * 14 + [True]
    assert e.stopped
    e2 = EarlyStopper(patience=7)
    for a in [0.9] + [0.85] * 7:
        e2.step(a)
    assert e2.stopped  # stopped after the 8th epoch


@criterion("AdaMax step magnitude, convergence, gradient check", 5)
def test_adamax_and_gradients():
    # constant gradient: every step has magnitude exactly alpha
    rng = np.random.Generator(np.random.PCG64(55))
    g = rng.normal(size=6)
    theta = np.zeros(6)
    s = AdaMaxState.for_params(theta, alpha=0.002)
    prev = theta
    for _ in range(10):
        theta = adamax_step(theta, g, s)
        assert np.abs(np.abs(theta - prev) - 0.002).max() <= 1e-15
        prev = theta
    # 1-D quadratic converges within 0.05 in 200 steps
    theta = np.array([0.0])
    s = AdaMaxState.for_params(theta, alpha=0.05)
    for _ in range(200):
        theta = adamax_step(theta, 2.0 * (theta - 3.0), s)
    assert abs(theta[0] - 3.0) < 0.05
    # analytic gradients vs central finite differences, 100 instances
    worst = 0.0
    for _ in range(100):
        n_classes = int(rng.integers(2, 5))
        dim = int(rng.integers(1, 5))
        n = int(rng.integers(1, 7))
        head = LinearHead(rng.normal(size=(n_classes, dim)),
                          rng.normal(size=n_classes))
        x = rng.normal(size=(n, dim))
        y = rng.integers(0, n_classes, size=n)
        _, gw, gb = loss_and_grad(head, x, y)
        analytic = np.concatenate([gw.reshape(-1), gb])
        numeric = finite_difference_grads(head, x, y)
        denom = np.maximum(np.abs(numeric), 1e-8)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    assert worst < 1e-4


@criterion("metrics oracle equivalence on 1000 random logs", 10)
def test_metrics_oracle_equivalence():
    rng = np.random.Generator(np.random.PCG64(77))
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        classes = [f"c{i}" for i in range(n)]
        total = int(rng.integers(1, 201))
        # raw prediction log, biased towards the diagonal
        rows = []
        for i in range(total):
            true = int(rng.integers(0, n))
            pred = true if rng.random() < 0.6 else int(rng.integers(0, n))
            rows.append(PredictionRow(id=f"r{i}", true_label=classes[true],
                                      pred_label=classes[pred],
                                      probs=np.array([1.0])))
        cm = confusion_from_log(rows, classes)
        report = compute_metrics(cm)
        oracle, _ = brute_force_metrics(cm.counts)
        for k, v in oracle.items():
            assert abs(getattr(report, k) - v) < 1e-12, k
        assert abs(report.recall_weighted - report.accuracy_std) < 1e-12
    from lesionkit.metrics import ConfusionMatrix
    worked = compute_metrics(ConfusionMatrix(
        classes=["a", "b", "c"],
        counts=np.array([[5, 1, 0], [1, 3, 1], [0, 0, 4]])))
    assert abs(worked.f1_weighted - 0.79259) < 1e-5


@pytest.fixture(scope="module")
def desk_scale_runs(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("e2e")
    root = tmp / "corpus"
    counts = {"dermatitis": 200, "healthy": 200, "lichen_planus": 200,
              "pityriasis_rosea": 200, "psoriasis": 200}
    class_map = generate_corpus(root, counts, seed=11, size=24)
    cfg = config_from_dict({
        "corpus_root": str(root),
        "class_map": class_map,
        "test_fraction": 0.2,
        "k": 5,
        "seed": 7,
        "created": "2026-01-01T00:00:00+00:00",
        "feature_side": 8,
        "train": {"max_epochs": 50, "batch_size": 32, "initial_lr": 0.02},
    })
    cfg.validate()
    out1, out2 = tmp / "run1", tmp / "run2"
    result = run_pipeline(cfg, out1)
    run_pipeline(cfg, out2)
    return out1, out2, result


@criterion("end-to-end desk-scale pipeline, weighted F1 >= 0.95", 600)
def test_end_to_end_pipeline(desk_scale_runs):
    out1, _, result = desk_scale_runs
    agg = json.loads((out1 / "metrics_cv.json").read_text())
    assert agg["f1_weighted"] >= 0.95
    assert result["cv"]["f1_weighted"] == agg["f1_weighted"]
    # every stage artifact present
    for name in ("manifest.jsonl", "split.jsonl", "folds.jsonl",
                 "metrics_cv.json", "metrics_test.json",
                 "confusion_test.svg", "report.txt"):
        assert (out1 / name).exists(), name


@criterion("determinism: byte-identical artifacts across identical runs", 60)
def test_pipeline_determinism(desk_scale_runs):
    out1, out2, _ = desk_scale_runs
    names = ["manifest_raw.jsonl", "manifest.jsonl", "removed.txt",
             "split.jsonl", "folds.jsonl", "features.csv",
             "features_train.csv", "metrics_cv.json", "metrics_test.json",
             "predictions_test.csv", "confusion_test.svg", "report.txt"]
    names += [f"folds/fold{f}/{n}" for f in range(5)
              for n in ("history.jsonl", "metrics_val.json",
                        "predictions_val.csv")]
    for name in names:
        a = (out1 / name).read_bytes()
        b = (out2 / name).read_bytes()
        assert a == b, f"artifact differs between runs: {name}"
