"""Softmax classification head over frozen-backbone features, trained with
AdaMax.

This is the transfer-learning strategy made framework-free: feature vectors
come from any extractor (the cheap builtin pixel extractor, or an external
backbone adapter writing the same FeatureTable text format), and only the
dense head is trained here.

AdaMax update (infinity-norm variant of Adam), per component:
    t <- t + 1
    m <- beta1 * m + (1 - beta1) * g
    u <- max(beta2 * u, |g|)
    theta <- theta - (alpha / (1 - beta1^t)) * m / u
with u == 0 meaning "no gradient history yet", which skips the update for
that component (0/0 is left undefined by the source equations).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import SplitMix64, derive_seed, shuffled
from .trainctl import (CheckpointPolicy, EarlyStopper, PlateauScheduler,
                       TrainingHistory, TrainLoopConfig, run_training_loop)


@dataclass
class FeatureTable:
    dim: int
    classes: list[str]
    ids: list[str]
    labels: np.ndarray        # int label indices, shape [n]
    features: np.ndarray      # float64, shape [n, dim]

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.shape != (len(self.ids), self.dim):
            raise ValueError(
                f"feature shape {self.features.shape} inconsistent with "
                f"{len(self.ids)} ids x dim {self.dim}")
        if not np.isfinite(self.features).all():
            raise ValueError("non-finite feature values")

    def subset(self, ids: set[str]) -> "FeatureTable":
        mask = np.array([i in ids for i in self.ids], dtype=bool)
        return FeatureTable(
            dim=self.dim, classes=self.classes,
            ids=[i for i, m in zip(self.ids, mask) if m],
            labels=self.labels[mask], features=self.features[mask])


def save_feature_table(t: FeatureTable, path: str | Path) -> None:
    """Text format: header "dim,<class0>,...", rows "id,label_index,f1,...,f_dim"."""
    with Path(path).open("w", encoding="utf-8") as f:
        f.write(",".join([str(t.dim)] + list(t.classes)) + "\n")
        for i, rid in enumerate(t.ids):
            feats = ",".join(repr(float(v)) for v in t.features[i])
            f.write(f"{rid},{int(t.labels[i])},{feats}\n")


def load_feature_table(path: str | Path) -> FeatureTable:
    with Path(path).open("r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        dim = int(header[0])
        classes = header[1:]
        ids, labels, rows = [], [], []
        for line in f:
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(",")
            ids.append(parts[0])
            labels.append(int(parts[1]))
            vec = np.array([float(v) for v in parts[2:]], dtype=np.float64)
            if vec.size != dim:
                raise ValueError(
                    f"row {parts[0]} has {vec.size} features, expected {dim}")
            rows.append(vec)
    features = np.vstack(rows) if rows else np.zeros((0, dim))
    return FeatureTable(dim=dim, classes=classes, ids=ids,
                        labels=np.array(labels, dtype=np.int64),
                        features=features)


@dataclass
class LinearHead:
    weights: np.ndarray  # [num_classes, dim]
    biases: np.ndarray   # [num_classes]

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2 or \
                self.biases.shape != (self.weights.shape[0],):
            raise ValueError(
                f"inconsistent head shapes: W {self.weights.shape}, "
                f"b {self.biases.shape}")
        if not (np.isfinite(self.weights).all()
                and np.isfinite(self.biases).all()):
            raise ValueError("non-finite head parameters")

    @staticmethod
    def zeros(num_classes: int, dim: int) -> "LinearHead":
        return LinearHead(np.zeros((num_classes, dim)), np.zeros(num_classes))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights.reshape(-1), self.biases])

    def load_flat(self, flat: np.ndarray) -> None:
        c, d = self.weights.shape
        self.weights = flat[:c * d].reshape(c, d).copy()
        self.biases = flat[c * d:].copy()


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(head: LinearHead, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one feature vector or a batch [n, dim]."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != head.weights.shape[1]:
        raise ValueError(f"dimension mismatch: features {x.shape[-1]}, "
                         f"head {head.weights.shape[1]}")
    return softmax(x @ head.weights.T + head.biases)


def loss_and_grad(head: LinearHead, x: np.ndarray, y: np.ndarray
                  ) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy over a batch and its analytic gradients.

    Gradient: (softmax - onehot) averaged over the batch, outer product
    with the features for W, summed for b.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("batch must be a nonempty [n, dim] array")
    p = forward(head, x)
    n = x.shape[0]
    loss = float(-np.log(p[np.arange(n), y] + 1e-300).mean())
    delta = p.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_w = delta.T @ x
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


@dataclass
class AdaMaxState:
    m: np.ndarray
    u: np.ndarray
    t: int = 0
    alpha: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999

    @staticmethod
    def for_params(params: np.ndarray, alpha: float = 0.002,
                   beta1: float = 0.9, beta2: float = 0.999) -> "AdaMaxState":
        return AdaMaxState(m=np.zeros_like(params, dtype=np.float64),
                           u=np.zeros_like(params, dtype=np.float64),
                           t=0, alpha=alpha, beta1=beta1, beta2=beta2)


def adamax_step(params: np.ndarray, grads: np.ndarray, s: AdaMaxState,
                alpha: float | None = None) -> np.ndarray:
    """One AdaMax update; mutates the state, returns the new parameters.

    alpha overrides the state's step size (the plateau scheduler drives it).
    """
    g = np.asarray(grads, dtype=np.float64)
    if g.shape != np.shape(params):
        raise ValueError(f"shape mismatch: params {np.shape(params)}, "
                         f"grads {g.shape}")
    if not np.isfinite(g).all():
        raise ValueError("non-finite gradient")
    a = s.alpha if alpha is None else alpha
    s.t += 1
    s.m = s.beta1 * s.m + (1.0 - s.beta1) * g
    s.u = np.maximum(s.beta2 * s.u, np.abs(g))
    scale = a / (1.0 - s.beta1 ** s.t)
    step = np.where(s.u > 0.0, scale * s.m / np.where(s.u > 0.0, s.u, 1.0),
                    0.0)
    return np.asarray(params, dtype=np.float64) - step


class HeadTrainer:
    """Trainer-protocol implementation for the linear head.

    Mini-batches are shuffled per epoch by a seeded generator, so a full
    run is a pure function of (features, fold membership, config, seed).
    """

    def __init__(self, train_x: np.ndarray, train_y: np.ndarray,
                 val_x: np.ndarray, val_y: np.ndarray,
                 head: LinearHead, seed: int):
        self.train_x = train_x
        self.train_y = train_y
        self.val_x = val_x
        self.val_y = val_y
        self.head = head
        self.seed = seed
        self.epoch = 0
        self.opt = AdaMaxState.for_params(head.flat())

    def train_one_epoch(self, lr: float, batch_size: int) -> float:
        rng = SplitMix64(derive_seed(self.seed, "batches", self.epoch))
        order = shuffled(list(range(len(self.train_y))), rng)
        losses = []
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            loss, gw, gb = loss_and_grad(self.head, self.train_x[idx],
                                         self.train_y[idx])
            flat_g = np.concatenate([gw.reshape(-1), gb])
            new_flat = adamax_step(self.head.flat(), flat_g, self.opt,
                                   alpha=lr)
            self.head.load_flat(new_flat)
            losses.append(loss)
        self.epoch += 1
        return float(np.mean(losses)) if losses else 0.0

    def evaluate(self) -> tuple[float, float]:
        loss, _, _ = loss_and_grad(self.head, self.val_x, self.val_y)
        pred = forward(self.head, self.val_x).argmax(axis=1)
        acc = float((pred == self.val_y).mean())
        return loss, acc

    def snapshot(self) -> np.ndarray:
        return self.head.flat()

    def restore(self, snap: np.ndarray) -> None:
        self.head.load_flat(np.asarray(snap, dtype=np.float64))


def train_head(features: FeatureTable, fold_of: dict[str, int],
               val_fold: int, cfg: TrainLoopConfig,
               scheduler: PlateauScheduler, stopper: EarlyStopper,
               seed: int, ckpt: CheckpointPolicy | None = None,
               train_features: FeatureTable | None = None
               ) -> tuple[LinearHead, TrainingHistory]:
    """Train a head with fold `val_fold` held out for validation.

    `features` supplies the validation rows (never augmented);
    `train_features`, when given, supplies the training rows (e.g. the
    augmented feature table). Both must share dim and class order.
    """
    src = train_features if train_features is not None else features
    if src.dim != features.dim or src.classes != features.classes:
        raise ValueError("training and validation feature tables disagree")
    train_ids = {i for i, f in fold_of.items() if f != val_fold}
    val_ids = {i for i, f in fold_of.items() if f == val_fold}
    tr = src.subset(train_ids)
    va = features.subset(val_ids)
    if not tr.ids or not va.ids:
        raise ValueError(f"empty train or validation set for fold {val_fold}")

    head = LinearHead.zeros(len(features.classes), features.dim)
    trainer = HeadTrainer(tr.features, tr.labels, va.features, va.labels,
                          head, seed)
    history = run_training_loop(trainer, cfg, scheduler, stopper, ckpt)
    return head, history


@dataclass
class PredictionRow:
    id: str
    true_label: str
    pred_label: str
    probs: np.ndarray


PredictionLog = list


def predict(head: LinearHead, features: FeatureTable,
            ids: set[str] | None = None) -> list[PredictionRow]:
    """One row per (selected) feature-table row; argmax ties go to the
    lowest class index."""
    t = features if ids is None else features.subset(ids)
    if not t.ids:
        return []
    probs = forward(head, t.features)
    preds = probs.argmax(axis=1)
    return [PredictionRow(id=rid,
                          true_label=t.classes[int(t.labels[i])],
                          pred_label=t.classes[int(preds[i])],
                          probs=probs[i])
            for i, rid in enumerate(t.ids)]


def save_prediction_log(rows: list[PredictionRow], path: str | Path) -> None:
    """Text format: "id,true,pred,p_0,...,p_{N-1}" per row."""
    with Path(path).open("w", encoding="utf-8") as f:
        for r in rows:
            probs = ",".join(repr(float(p)) for p in r.probs)
            f.write(f"{r.id},{r.true_label},{r.pred_label},{probs}\n")


def load_prediction_log(path: str | Path) -> list[PredictionRow]:
    rows = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(",")
            rows.append(PredictionRow(
                id=parts[0], true_label=parts[1], pred_label=parts[2],
                probs=np.array([float(v) for v in parts[3:]])))
    return rows
