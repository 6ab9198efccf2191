"""Deterministic preprocessing and training-time augmentation.

Training samples get a random rotation in [0, rotation_max_deg], then
horizontal/vertical flips with their configured probabilities; every sample
(training or not) is resized to the model's input size and normalized to
[0, 1]. The per-sample randomness is a pure function of
(master_seed, record_id, epoch), so results do not depend on worker count
or iteration order. Draw order within a sample is fixed:
angle, hflip, vflip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imageops import hflip, resize_bilinear, rotate_bilinear, vflip
from .rng import SplitMix64, derive_seed


@dataclass
class AugmentPolicy:
    rotation_max_deg: float = 20.0
    hflip_prob: float = 0.5
    vflip_prob: float = 0.5
    target_size: tuple[int, int] = (224, 224)  # (width, height)
    normalize: bool = True

    def __post_init__(self):
        if not (0.0 <= self.rotation_max_deg < 360.0):
            raise ValueError(f"rotation_max_deg out of range: "
                             f"{self.rotation_max_deg}")
        for name in ("hflip_prob", "vflip_prob"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name} out of range: {p}")
        if self.target_size[0] <= 0 or self.target_size[1] <= 0:
            raise ValueError(f"target_size must be positive: "
                             f"{self.target_size}")


def sample_rng(master_seed: int, record_id: str, epoch: int) -> SplitMix64:
    return SplitMix64(derive_seed(master_seed, "augment", record_id, epoch))


def normalize(img: np.ndarray, bit_depth: int = 8) -> np.ndarray:
    """Map integer channel values in [0, 2^D - 1] onto [0, 1], exact at both
    endpoints."""
    return np.asarray(img, dtype=np.float64) / float((1 << bit_depth) - 1)


def apply_pipeline(img: np.ndarray, policy: AugmentPolicy, *,
                   master_seed: int, record_id: str, epoch: int,
                   training: bool, bit_depth: int = 8) -> np.ndarray:
    """Run one image through the full preprocessing pipeline.

    Augmentation (rotation + flips) only happens when training is true;
    resize and normalization always run. Output values lie in [0, 1]
    (bilinear resampling is a convex combination of inputs).
    """
    arr = np.asarray(img, dtype=np.float64)
    if training:
        rng = sample_rng(master_seed, record_id, epoch)
        angle = rng.next_float() * policy.rotation_max_deg
        do_h = rng.next_float() < policy.hflip_prob
        do_v = rng.next_float() < policy.vflip_prob
        if angle != 0.0:
            arr = rotate_bilinear(arr, angle)
        if do_h:
            arr = hflip(arr)
        if do_v:
            arr = vflip(arr)
    w, h = policy.target_size
    arr = resize_bilinear(arr, h, w)
    if policy.normalize:
        arr = normalize(arr, bit_depth)
    return arr
