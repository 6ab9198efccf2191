import math

import numpy as np
import pytest

from lesionkit.partition import stratified_kfold
from lesionkit.refmodel import (AdaMaxState, FeatureTable, LinearHead,
                                adamax_step, forward, load_feature_table,
                                load_prediction_log, loss_and_grad, predict,
                                save_feature_table, save_prediction_log,
                                train_head)
from lesionkit.trainctl import (EarlyStopper, PlateauScheduler,
                                TrainLoopConfig)
from conftest import make_manifest


def _random_head(rng, n_classes, dim):
    return LinearHead(rng.normal(size=(n_classes, dim)),
                      rng.normal(size=n_classes))


# --- forward / softmax -----------------------------------------------------

def test_zero_head_uniform_probs():
    head = LinearHead.zeros(5, 3)
    p = forward(head, np.ones(3))
    assert np.allclose(p, 0.2)


def test_dominant_logit():
    head = LinearHead(np.zeros((3, 2)), np.array([10.0, 0.0, 0.0]))
    p = forward(head, np.zeros(2))
    assert p[0] > 1 - 1e-4


def test_probs_sum_to_one():
    rng = np.random.Generator(np.random.PCG64(0))
    for _ in range(20):
        head = _random_head(rng, 4, 6)
        p = forward(head, rng.normal(size=6))
        assert abs(p.sum() - 1.0) < 1e-12


def test_softmax_shift_invariance():
    rng = np.random.Generator(np.random.PCG64(1))
    head = _random_head(rng, 5, 4)
    x = rng.normal(size=4)
    p1 = forward(head, x)
    shifted = LinearHead(head.weights, head.biases + 123.456)
    p2 = forward(shifted, x)
    assert np.abs(p1 - p2).max() < 1e-12


def test_forward_dimension_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        forward(LinearHead.zeros(3, 4), np.ones(5))


# --- loss and gradients ----------------------------------------------------

def test_uniform_loss_is_log_n():
    head = LinearHead.zeros(4, 3)
    x = np.ones((6, 3))
    y = np.array([0, 1, 2, 3, 0, 1])
    loss, _, _ = loss_and_grad(head, x, y)
    assert loss == pytest.approx(math.log(4))


def test_confident_predictions_near_zero_loss():
    head = LinearHead(np.array([[50.0], [-50.0]]), np.zeros(2))
    x = np.array([[1.0], [-1.0]])
    y = np.array([0, 1])
    loss, _, _ = loss_and_grad(head, x, y)
    assert loss < 1e-6


def finite_difference_grads(head, x, y, h=1e-5):
    def loss_at(flat):
        probe = LinearHead.zeros(*head.weights.shape)
        probe.load_flat(flat)
        return loss_and_grad(probe, x, y)[0]

    base = head.flat()
    grad = np.zeros_like(base)
    for i in range(base.size):
        up, down = base.copy(), base.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (loss_at(up) - loss_at(down)) / (2 * h)
    return grad


def test_gradients_match_central_finite_differences():
    rng = np.random.Generator(np.random.PCG64(7))
    worst = 0.0
    for _ in range(100):
        n_classes = int(rng.integers(2, 5))
        dim = int(rng.integers(1, 5))
        n = int(rng.integers(1, 7))
        head = _random_head(rng, n_classes, dim)
        x = rng.normal(size=(n, dim))
        y = rng.integers(0, n_classes, size=n)
        _, gw, gb = loss_and_grad(head, x, y)
        analytic = np.concatenate([gw.reshape(-1), gb])
        numeric = finite_difference_grads(head, x, y)
        denom = np.maximum(np.abs(numeric), 1e-8)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    assert worst < 1e-4


def test_empty_batch_rejected():
    with pytest.raises(ValueError):
        loss_and_grad(LinearHead.zeros(2, 2), np.zeros((0, 2)),
                      np.zeros(0, dtype=int))


# --- AdaMax ----------------------------------------------------------------

def test_constant_gradient_steps_exactly_alpha():
    theta = np.array([0.0])
    s = AdaMaxState.for_params(theta, alpha=0.002)
    theta = adamax_step(theta, np.array([1.0]), s)
    assert theta[0] == pytest.approx(-0.002, abs=1e-15)
    theta = adamax_step(theta, np.array([1.0]), s)
    assert theta[0] == pytest.approx(-0.004, abs=1e-15)


def test_constant_gradient_magnitude_over_many_steps():
    rng = np.random.Generator(np.random.PCG64(2))
    g = rng.normal(size=8)
    theta = np.zeros(8)
    s = AdaMaxState.for_params(theta, alpha=0.01)
    prev = theta
    for _ in range(25):
        theta = adamax_step(theta, g, s)
        step = theta - prev
        assert np.abs(np.abs(step) - 0.01).max() <= 1e-15
        assert np.array_equal(np.sign(step), -np.sign(g))
        prev = theta


def test_zero_gradient_fresh_state_is_noop():
    theta = np.array([1.0, -2.0])
    s = AdaMaxState.for_params(theta)
    out = adamax_step(theta, np.zeros(2), s)
    assert np.array_equal(out, theta)
    assert s.t == 1


def test_quadratic_converges():
    # reference trace of the same update equations, scripted independently
    def reference(theta0, steps, alpha, b1, b2):
        theta, m, u = theta0, 0.0, 0.0
        for t in range(1, steps + 1):
            g = 2.0 * (theta - 3.0)
            m = b1 * m + (1 - b1) * g
            u = max(b2 * u, abs(g))
            if u > 0:
                theta -= (alpha / (1 - b1 ** t)) * m / u
        return theta

    theta = np.array([0.0])
    s = AdaMaxState.for_params(theta, alpha=0.05)
    for _ in range(200):
        g = 2.0 * (theta - 3.0)
        theta = adamax_step(theta, g, s)
    ref = reference(0.0, 200, 0.05, 0.9, 0.999)
    assert theta[0] == pytest.approx(ref, abs=1e-12)
    assert abs(theta[0] - 3.0) < 0.05


def test_nonfinite_gradient_rejected():
    theta = np.zeros(2)
    s = AdaMaxState.for_params(theta)
    with pytest.raises(ValueError, match="non-finite"):
        adamax_step(theta, np.array([1.0, np.inf]), s)


def test_u_accumulator_nonnegative():
    rng = np.random.Generator(np.random.PCG64(3))
    theta = np.zeros(4)
    s = AdaMaxState.for_params(theta)
    for t in range(1, 31):
        theta = adamax_step(theta, rng.normal(size=4), s)
        assert (s.u >= 0).all()
        assert s.t == t


# --- head training ---------------------------------------------------------

def _feature_table(features, labels, classes):
    return FeatureTable(dim=features.shape[1], classes=classes,
                        ids=[f"r{i}" for i in range(len(labels))],
                        labels=np.asarray(labels),
                        features=np.asarray(features, dtype=float))


def _blob_table(rng, n_per_class, classes, dim, spread=0.15):
    feats, labels = [], []
    for ci in range(len(classes)):
        center = rng.normal(size=dim)
        center /= np.linalg.norm(center)
        for _ in range(n_per_class):
            feats.append(center + spread * rng.normal(size=dim))
            labels.append(ci)
    return _feature_table(np.array(feats), labels, classes)


def _run_train(table, folds, val_fold=0, max_epochs=50, seed=13):
    cfg = TrainLoopConfig(max_epochs=max_epochs, batch_size=32,
                          initial_lr=0.05)
    return train_head(table, folds, val_fold, cfg,
                      PlateauScheduler(lr=cfg.initial_lr),
                      EarlyStopper(patience=7), seed=seed)


def _fold_map(table, k):
    return {rid: i % k for i, rid in enumerate(table.ids)}


def test_separable_two_class_reaches_full_train_accuracy():
    rng = np.random.Generator(np.random.PCG64(21))
    feats = np.vstack([rng.normal(size=(30, 2)) + [4, 0],
                       rng.normal(size=(30, 2)) + [-4, 0]])
    table = _feature_table(feats, [0] * 30 + [1] * 30, ["neg", "pos"])
    folds = _fold_map(table, 5)
    head, history = _run_train(table, folds)
    train_ids = {rid for rid, f in folds.items() if f != 0}
    rows = predict(head, table, ids=train_ids)
    acc = np.mean([r.true_label == r.pred_label for r in rows])
    assert acc == 1.0
    assert len(history) <= 50


def test_gaussian_blobs_validation_f1():
    from lesionkit.metrics import compute_metrics, confusion_from_log
    rng = np.random.Generator(np.random.PCG64(22))
    classes = ["c0", "c1", "c2", "c3", "c4"]
    table = _blob_table(rng, 40, classes, dim=16)
    folds = _fold_map(table, 5)
    head, _ = _run_train(table, folds)
    val_ids = {rid for rid, f in folds.items() if f == 0}
    rows = predict(head, table, ids=val_ids)
    report = compute_metrics(confusion_from_log(rows, classes))
    assert report.f1_weighted >= 0.95


def test_zero_epoch_budget_returns_initialized_head():
    rng = np.random.Generator(np.random.PCG64(23))
    table = _blob_table(rng, 10, ["a", "b"], dim=4)
    folds = _fold_map(table, 2)
    head, history = _run_train(table, folds, max_epochs=0)
    assert history == []
    assert np.array_equal(head.weights, np.zeros_like(head.weights))
    assert np.array_equal(head.biases, np.zeros_like(head.biases))


def test_training_is_deterministic():
    rng = np.random.Generator(np.random.PCG64(24))
    table = _blob_table(rng, 15, ["a", "b", "c"], dim=6)
    folds = _fold_map(table, 3)
    h1, hist1 = _run_train(table, folds, seed=5)
    h2, hist2 = _run_train(table, folds, seed=5)
    assert np.array_equal(h1.flat(), h2.flat())
    assert [e.to_json_line() for e in hist1] == \
        [e.to_json_line() for e in hist2]


# --- predict + wire formats ------------------------------------------------

def test_predict_tie_breaks_to_lowest_class_index():
    table = _feature_table(np.zeros((3, 2)), [2, 1, 0], ["a", "b", "c"])
    rows = predict(LinearHead.zeros(3, 2), table)
    assert [r.pred_label for r in rows] == ["a", "a", "a"]
    assert len(rows) == 3


def test_prediction_log_roundtrip(tmp_path):
    rng = np.random.Generator(np.random.PCG64(25))
    table = _blob_table(rng, 5, ["a", "b"], dim=3)
    head = _random_head(rng, 2, 3)
    rows = predict(head, table)
    path = tmp_path / "log.csv"
    save_prediction_log(rows, path)
    loaded = load_prediction_log(path)
    assert [r.id for r in loaded] == [r.id for r in rows]
    for a, b in zip(loaded, rows):
        assert a.true_label == b.true_label
        assert a.pred_label == b.pred_label
        assert np.array_equal(a.probs, b.probs)


def test_feature_table_roundtrip(tmp_path):
    rng = np.random.Generator(np.random.PCG64(26))
    table = _blob_table(rng, 4, ["x", "y"], dim=5)
    path = tmp_path / "feat.csv"
    save_feature_table(table, path)
    loaded = load_feature_table(path)
    assert loaded.dim == table.dim
    assert loaded.classes == table.classes
    assert loaded.ids == table.ids
    assert np.array_equal(loaded.features, table.features)
    assert np.array_equal(loaded.labels, table.labels)


def test_feature_table_rejects_nonfinite():
    with pytest.raises(ValueError, match="non-finite"):
        _feature_table(np.array([[1.0, np.nan]]), [0], ["a"])
