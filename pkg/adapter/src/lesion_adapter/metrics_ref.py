"""Independent weighted-metric reference built on scikit-learn.

Used to cross-check the toolkit's own metric implementation from a
second, unrelated codebase.
"""

from __future__ import annotations

from sklearn.metrics import accuracy_score, precision_recall_fscore_support


def weighted_metrics(true_labels: list[str], pred_labels: list[str],
                     classes: list[str]) -> dict[str, float]:
    p, r, f1, _ = precision_recall_fscore_support(
        true_labels, pred_labels, labels=classes, average="weighted",
        zero_division=0)
    return {
        "accuracy_std": float(accuracy_score(true_labels, pred_labels)),
        "precision_weighted": float(p),
        "recall_weighted": float(r),
        "f1_weighted": float(f1),
    }
