"""Builtin cheap feature extractor: downsampled normalized pixels.

Real backbone features arrive from the external adapter in the same
FeatureTable format; this extractor keeps the pipeline runnable (and the
test suite meaningful) without any deep-learning framework.

Augmentation wiring: training rows may be extracted through the training
branch of the augment pipeline; validation and test rows always go through
the evaluation branch (resize + normalize only).
"""

from __future__ import annotations

import numpy as np

from .augment import AugmentPolicy, apply_pipeline
from .catalog import Manifest, load_image
from .refmodel import FeatureTable


def extract_pixel_features(m: Manifest, side: int = 8, *,
                           policy: AugmentPolicy | None = None,
                           training: bool = False,
                           master_seed: int = 0, epoch: int = 0,
                           include: set[str] | None = None,
                           root: str | None = None) -> FeatureTable:
    """Resize each image to side x side, normalize to [0, 1], flatten.

    With a policy and training=True the image first passes through the
    seeded augmentation pipeline (rotation + flips).
    """
    from pathlib import Path
    base = Path(root) if root is not None else Path(m.corpus_root)
    if policy is None:
        policy = AugmentPolicy(rotation_max_deg=0.0, hflip_prob=0.0,
                               vflip_prob=0.0, target_size=(side, side))
    else:
        policy = AugmentPolicy(rotation_max_deg=policy.rotation_max_deg,
                               hflip_prob=policy.hflip_prob,
                               vflip_prob=policy.vflip_prob,
                               target_size=(side, side),
                               normalize=policy.normalize)
    class_index = {c: i for i, c in enumerate(m.classes)}
    ids, labels, rows = [], [], []
    for r in m.records:
        if include is not None and r.id not in include:
            continue
        img = load_image(base / r.path)
        if img.ndim == 2:  # promote grayscale so dim is corpus-independent
            img = np.stack([img, img, img], axis=-1)
        tensor = apply_pipeline(img, policy, master_seed=master_seed,
                                record_id=r.id, epoch=epoch,
                                training=training)
        ids.append(r.id)
        labels.append(class_index[r.label])
        rows.append(tensor.reshape(-1))
    dim = rows[0].size if rows else 3 * side * side
    features = np.vstack(rows) if rows else np.zeros((0, dim))
    return FeatureTable(dim=dim, classes=list(m.classes), ids=ids,
                        labels=np.array(labels, dtype=np.int64),
                        features=features)
