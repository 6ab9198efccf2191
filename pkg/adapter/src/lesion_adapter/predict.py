"""Prediction export using a trained softmax head checkpoint.

The head is read from the toolkit's checkpoint format and applied to a
feature-table-shaped set of rows; the resulting prediction log matches
the toolkit's on-disk format row for row.
"""

from __future__ import annotations

import numpy as np

from .wire import read_head_checkpoint


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict_rows(checkpoint_path, feature_rows, classes: list[str]
                 ) -> list[tuple[str, str, str, np.ndarray]]:
    """(id, true, pred, probs) per row, ties resolved to the lowest class
    index as the toolkit does."""
    ckpt_classes, weights, biases = read_head_checkpoint(checkpoint_path)
    if ckpt_classes != list(classes):
        raise ValueError(f"checkpoint classes {ckpt_classes} do not match "
                         f"manifest classes {list(classes)}")
    out = []
    for rid, label_idx, vec in feature_rows:
        if vec.size != weights.shape[1]:
            raise ValueError(f"feature dim {vec.size} does not match head "
                             f"dim {weights.shape[1]}")
        probs = softmax(weights @ vec + biases)
        pred = int(np.argmax(probs))
        out.append((rid, classes[label_idx], classes[pred], probs))
    return out
