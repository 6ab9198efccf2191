"""Confusion matrices and multiclass evaluation metrics.

Two averaging conventions are computed side by side:

- macro: the unweighted 1/N mean over classes (including the one-vs-rest
  accuracy `accuracy_eq1`, which counts TN and therefore differs from
  plain trace/total)
- weighted: per-class metrics averaged with weights equal to class support

The weighted variant is the headline. Weighted recall is identically
trace/total (sum over classes of support_i/total * TP_i/support_i), which
the test suite asserts on random matrices.

Zero-denominator convention: the affected per-class metric is 0 and the
class is listed in the report's `flags`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MetricsError(ValueError):
    pass


@dataclass
class ConfusionMatrix:
    classes: list[str]
    counts: np.ndarray  # [N, N] int64; rows = true, columns = predicted

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.classes)
        if self.counts.shape != (n, n):
            raise MetricsError(
                f"counts shape {self.counts.shape} != ({n}, {n})")
        if (self.counts < 0).any():
            raise MetricsError("negative counts")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_from_log(rows, classes: list[str]) -> ConfusionMatrix:
    """Count (true, predicted) pairs from prediction-log rows."""
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for r in rows:
        if r.true_label not in index or r.pred_label not in index:
            raise MetricsError(
                f"unknown label in log row {r.id}: "
                f"{r.true_label!r}/{r.pred_label!r}")
        counts[index[r.true_label], index[r.pred_label]] += 1
    return ConfusionMatrix(classes=list(classes), counts=counts)


@dataclass
class ClassTally:
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray


def class_tally(cm: ConfusionMatrix) -> ClassTally:
    tp = np.diag(cm.counts).astype(np.int64)
    fn = cm.counts.sum(axis=1) - tp
    fp = cm.counts.sum(axis=0) - tp
    tn = cm.total - tp - fn - fp
    return ClassTally(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass
class MetricReport:
    classes: list[str]
    support: list[int]
    accuracy_std: float          # trace / total
    accuracy_eq1: float          # 1/N mean of per-class (TP+TN)/total
    precision_macro: float
    recall_macro: float
    f1_macro: float
    precision_weighted: float
    recall_weighted: float
    f1_weighted: float
    per_class: list[dict]
    row_percent: list[list[float]]
    flags: list[str] = field(default_factory=list)

    SCALARS = ("accuracy_std", "accuracy_eq1", "precision_macro",
               "recall_macro", "f1_macro", "precision_weighted",
               "recall_weighted", "f1_weighted")

    def to_dict(self) -> dict:
        return {
            "classes": self.classes,
            "support": self.support,
            **{k: getattr(self, k) for k in self.SCALARS},
            "per_class": self.per_class,
            "row_percent": self.row_percent,
            "flags": self.flags,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return np.where(den > 0, num / np.where(den > 0, den, 1), 0.0)


def compute_metrics(cm: ConfusionMatrix) -> MetricReport:
    total = cm.total
    if total == 0:
        raise MetricsError("empty matrix")
    t = class_tally(cm)
    support = cm.counts.sum(axis=1)
    n = len(cm.classes)

    precision = _safe_div(t.tp.astype(float), (t.tp + t.fp).astype(float))
    recall = _safe_div(t.tp.astype(float), (t.tp + t.fn).astype(float))
    pr_sum = precision + recall
    f1 = _safe_div(2.0 * precision * recall, pr_sum)

    flags = []
    for i, c in enumerate(cm.classes):
        if t.tp[i] + t.fp[i] == 0:
            flags.append(f"zero-division precision: {c}")
        if t.tp[i] + t.fn[i] == 0:
            flags.append(f"zero-division recall: {c}")

    w = support / total
    per_class = [
        {"class": cm.classes[i], "support": int(support[i]),
         "tp": int(t.tp[i]), "fp": int(t.fp[i]), "fn": int(t.fn[i]),
         "tn": int(t.tn[i]),
         "precision": float(precision[i]), "recall": float(recall[i]),
         "f1": float(f1[i])}
        for i in range(n)
    ]
    row_percent, empty_rows = normalize_rows(cm)
    flags += [f"empty row: {c}" for c in empty_rows]

    return MetricReport(
        classes=list(cm.classes),
        support=[int(s) for s in support],
        accuracy_std=float(np.trace(cm.counts) / total),
        accuracy_eq1=float(((t.tp + t.tn) / total).mean()),
        precision_macro=float(precision.mean()),
        recall_macro=float(recall.mean()),
        f1_macro=float(f1.mean()),
        precision_weighted=float((w * precision).sum()),
        recall_weighted=float((w * recall).sum()),
        f1_weighted=float((w * f1).sum()),
        per_class=per_class,
        row_percent=[[float(v) for v in row] for row in row_percent],
        flags=flags,
    )


def normalize_rows(cm: ConfusionMatrix) -> tuple[np.ndarray, list[str]]:
    """Row-percent matrix (each row divided by its support) plus the names
    of empty rows, which are rendered as zeros."""
    if cm.total == 0:
        raise MetricsError("empty matrix")
    support = cm.counts.sum(axis=1)
    out = _safe_div(cm.counts.astype(float),
                    support.astype(float).reshape(-1, 1))
    empty = [cm.classes[i] for i in range(len(cm.classes)) if support[i] == 0]
    return out, empty


def aggregate_folds(reports: list[tuple[MetricReport, int]]) -> MetricReport:
    """Fold-size-weighted mean of every scalar metric (and per-class
    precision/recall/f1 when class lists agree)."""
    if not reports:
        raise MetricsError("no fold reports to aggregate")
    sizes = np.array([s for _, s in reports], dtype=float)
    if sizes.sum() <= 0:
        raise MetricsError("fold sizes must be positive")
    w = sizes / sizes.sum()
    first = reports[0][0]
    classes = first.classes
    if any(r.classes != classes for r, _ in reports):
        raise MetricsError("fold reports have differing class lists")

    scalars = {k: float(sum(wi * getattr(r, k)
                            for (r, _), wi in zip(reports, w)))
               for k in MetricReport.SCALARS}
    per_class = []
    for i, c in enumerate(classes):
        entry = {"class": c,
                 "support": int(sum(r.per_class[i]["support"]
                                    for r, _ in reports))}
        for k in ("precision", "recall", "f1"):
            entry[k] = float(sum(wi * r.per_class[i][k]
                                 for (r, _), wi in zip(reports, w)))
        per_class.append(entry)
    support = [e["support"] for e in per_class]
    flags = sorted({f for r, _ in reports for f in r.flags})
    return MetricReport(classes=list(classes), support=support,
                        per_class=per_class, row_percent=[],
                        flags=flags, **scalars)


def save_report(report: MetricReport, path: str | Path) -> None:
    Path(path).write_text(report.to_json() + "\n", encoding="utf-8")
