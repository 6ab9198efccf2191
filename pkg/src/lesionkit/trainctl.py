"""Training-control state machines and the epoch loop.

Framework-free by design: the plateau scheduler, early stopper and
checkpoint policy operate on plain floats fed to them once per epoch, and
the loop talks to any trainer through a four-method protocol. Semantics are
pinned precisely because framework conventions differ:

- improvement is strict inequality with zero min-delta and zero cooldown
- the scheduler monitors validation loss (min mode); after `patience`
  consecutive non-improving epochs the LR is multiplied by `factor`
  (clamped at min_lr) and the bad-epoch counter resets
- the stopper monitors validation accuracy (max mode); it fires when the
  counter reaches its patience and never un-fires
- the kept checkpoint is the best validation accuracy seen so far, ties
  broken by earliest epoch
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import numpy as np


class InvalidMetricError(ValueError):
    pass


class TrainerError(RuntimeError):
    pass


@dataclass
class PlateauScheduler:
    lr: float
    factor: float = 1e-3
    patience: int = 3
    min_lr: float = 0.0
    best_loss: Optional[float] = None
    bad_epochs: int = 0

    def step(self, val_loss: float) -> bool:
        """Feed one epoch's validation loss; returns True iff LR was reduced."""
        if math.isnan(val_loss):
            raise InvalidMetricError("invalid metric: NaN validation loss")
        if self.best_loss is None or val_loss < self.best_loss:
            self.best_loss = val_loss
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        if self.bad_epochs >= self.patience:
            self.lr = max(self.lr * self.factor, self.min_lr)
            self.bad_epochs = 0
            return True
        return False


@dataclass
class EarlyStopper:
    patience: int = 7
    best_acc: Optional[float] = None
    bad_epochs: int = 0
    stopped: bool = False

    def step(self, val_acc: float) -> bool:
        """Feed one epoch's validation accuracy; returns the stopped flag."""
        if math.isnan(val_acc):
            raise InvalidMetricError("invalid metric: NaN validation accuracy")
        if self.stopped:
            return True
        if self.best_acc is None or val_acc > self.best_acc:
            self.best_acc = val_acc
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.stopped = True
        return self.stopped


@dataclass
class TrainLoopConfig:
    max_epochs: int = 50
    batch_size: int = 32
    initial_lr: float = 0.002

    def __post_init__(self):
        if self.max_epochs < 0 or self.batch_size <= 0 or self.initial_lr <= 0:
            raise ValueError(f"invalid training config: {self}")


@dataclass
class CheckpointPolicy:
    directory: Path
    classes: list[str]
    filename: str = "best.ckpt"

    @property
    def path(self) -> Path:
        return Path(self.directory) / self.filename


@dataclass
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float
    val_acc: float
    events: list[str] = field(default_factory=list)

    def to_json_line(self) -> str:
        return json.dumps(
            {"epoch": self.epoch, "lr": self.lr,
             "train_loss": self.train_loss, "val_loss": self.val_loss,
             "val_acc": self.val_acc, "events": self.events},
            sort_keys=True, separators=(",", ":"))


TrainingHistory = list[EpochLog]


def save_history(history: TrainingHistory, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        for e in history:
            f.write(e.to_json_line() + "\n")


class Trainer(Protocol):
    def train_one_epoch(self, lr: float, batch_size: int) -> float: ...
    def evaluate(self) -> tuple[float, float]: ...
    def snapshot(self) -> np.ndarray: ...
    def restore(self, snap: np.ndarray) -> None: ...


CKPT_MAGIC = b"LKCK1\n"


def save_checkpoint(path: str | Path, classes: list[str],
                    params: np.ndarray) -> None:
    """Versioned header + class list + flat little-endian float64 parameter
    array, guarded by a SHA-256 content checksum."""
    flat = np.ascontiguousarray(params, dtype="<f8").reshape(-1)
    payload = flat.tobytes()
    header = json.dumps(
        {"classes": classes, "count": int(flat.size),
         "sha256": hashlib.sha256(payload).hexdigest()},
        sort_keys=True, separators=(",", ":"))
    with Path(path).open("wb") as f:
        f.write(CKPT_MAGIC)
        f.write(header.encode("utf-8") + b"\n")
        f.write(payload)


def load_checkpoint(path: str | Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open("rb") as f:
        magic = f.read(len(CKPT_MAGIC))
        if magic != CKPT_MAGIC:
            raise ValueError(f"not a checkpoint file: {path}")
        header = json.loads(f.readline())
        payload = f.read()
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise ValueError(f"checkpoint checksum mismatch: {path}")
    flat = np.frombuffer(payload, dtype="<f8")
    if flat.size != header["count"]:
        raise ValueError(f"checkpoint length mismatch: {path}")
    return header["classes"], flat.copy()


def run_training_loop(trainer: Trainer, cfg: TrainLoopConfig,
                      scheduler: PlateauScheduler, stopper: EarlyStopper,
                      ckpt: CheckpointPolicy | None = None
                      ) -> TrainingHistory:
    """Drive the trainer for up to max_epochs under the full control stack.

    After each epoch the scheduler sees val loss and the stopper sees val
    accuracy; a new best accuracy snapshots (and optionally checkpoints)
    the model. On exit the best snapshot is restored.
    """
    history: TrainingHistory = []
    best_acc: Optional[float] = None
    best_snapshot: Optional[np.ndarray] = None

    for epoch in range(1, cfg.max_epochs + 1):
        lr = scheduler.lr
        try:
            train_loss = trainer.train_one_epoch(lr, cfg.batch_size)
            val_loss, val_acc = trainer.evaluate()
        except Exception as exc:
            raise TrainerError(f"trainer failed at epoch {epoch}: {exc}") \
                from exc

        events: list[str] = []
        if best_acc is None or val_acc > best_acc:
            best_acc = val_acc
            best_snapshot = np.array(trainer.snapshot(), copy=True)
            events.append("checkpoint")
            if ckpt is not None:
                Path(ckpt.directory).mkdir(parents=True, exist_ok=True)
                save_checkpoint(ckpt.path, ckpt.classes, best_snapshot)
        if scheduler.step(val_loss):
            events.append("lr_reduced")
        if stopper.step(val_acc):
            events.append("early_stop")

        history.append(EpochLog(epoch=epoch, lr=lr, train_loss=train_loss,
                                val_loss=val_loss, val_acc=val_acc,
                                events=events))
        if stopper.stopped:
            break

    if best_snapshot is not None:
        trainer.restore(best_snapshot)
    return history
