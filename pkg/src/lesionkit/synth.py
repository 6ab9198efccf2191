"""Synthetic corpus generation for tests and demo runs.

Each class gets a distinct base color and stripe texture plus per-image
noise, which makes the classes near-separable for even the cheap pixel
extractor. Byte-duplicates can be injected to exercise the dedup stage.
"""

from __future__ import annotations

import shutil
from pathlib import Path

import numpy as np
from PIL import Image

from .rng import derive_seed

DEFAULT_CLASSES = ["dermatitis", "healthy", "lichen_planus",
                   "pityriasis_rosea", "psoriasis"]

# distinct base RGB per class, stripes on a class-specific axis
_BASE_COLORS = [
    (200, 60, 60), (90, 190, 90), (70, 90, 200),
    (210, 200, 70), (180, 80, 190), (80, 190, 190),
    (230, 140, 60), (140, 140, 140),
]


def _render(cls_idx: int, seed: int, size: int,
            noise_amp: float) -> np.ndarray:
    base = np.array(_BASE_COLORS[cls_idx % len(_BASE_COLORS)], dtype=float)
    img = np.tile(base, (size, size, 1))
    stripe = np.arange(size) % (2 + cls_idx)
    if cls_idx % 2 == 0:
        img[stripe == 0, :, :] *= 0.7
    else:
        img[:, stripe == 0, :] *= 0.7
    noise = np.random.Generator(np.random.PCG64(seed)).random((size, size))
    img += (noise[:, :, None] - 0.5) * noise_amp
    return np.clip(img, 0, 255).astype(np.uint8)


def generate_corpus(root: str | Path, counts: dict[str, int], *,
                    seed: int = 0, duplicates: int = 0,
                    size: int = 24,
                    noise_amp: float = 60.0) -> dict[str, str]:
    """Write a directory-per-class PNG corpus; returns the class map.

    `duplicates` extra images are appended round-robin across classes as
    byte-copies of existing files, so the corpus holds exactly that many
    byte-duplicates.
    """
    root = Path(root)
    classes = sorted(counts)
    class_map = {}
    originals: list[Path] = []
    for ci, cls in enumerate(classes):
        d = root / cls
        d.mkdir(parents=True, exist_ok=True)
        class_map[cls] = cls
        for i in range(counts[cls]):
            img = _render(ci, derive_seed(seed, "synth", cls, i) % (1 << 63),
                          size, noise_amp)
            p = d / f"{cls}_{i:05d}.png"
            Image.fromarray(img).save(p)
            originals.append(p)
    for j in range(duplicates):
        src = originals[j % len(originals)]
        dst = src.parent / f"{src.stem}_dup{j:04d}.png"
        shutil.copyfile(src, dst)
    return class_map
