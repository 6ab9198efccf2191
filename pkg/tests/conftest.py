from __future__ import annotations

import numpy as np
import pytest

from lesionkit.catalog import ImageRecord, Manifest


def make_manifest(class_counts: dict[str, int],
                  created: str = "2026-01-01T00:00:00+00:00") -> Manifest:
    """In-memory manifest with fabricated records, no files behind it."""
    classes = sorted(class_counts)
    records = []
    for cls in classes:
        for i in range(class_counts[cls]):
            records.append(ImageRecord(
                id=f"{cls}-{i:05d}", path=f"{cls}/{i:05d}.png",
                label=cls, source=cls, width=24, height=24))
    return Manifest(classes=classes, records=records, created=created,
                    corpus_root="/nonexistent")


@pytest.fixture
def tiny_corpus(tmp_path):
    """Small on-disk synthetic corpus: 3 classes x 8 images."""
    from lesionkit.synth import generate_corpus
    root = tmp_path / "corpus"
    class_map = generate_corpus(root, {"a": 8, "b": 8, "c": 8}, seed=7)
    return root, class_map


def rand_matrix(rng: np.random.Generator, n_classes: int,
                total: int) -> np.ndarray:
    flat = rng.multinomial(total, np.ones(n_classes * n_classes)
                           / (n_classes * n_classes))
    return flat.reshape(n_classes, n_classes).astype(np.int64)
