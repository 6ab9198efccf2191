"""Perceptual-hash deduplication.

dHash wire definition (fixed, see also imageops):
grayscale by luma 0.299/0.587/0.114, bilinear resample to 9 columns x 8 rows,
emit bit 1 where pixel(x, y) > pixel(x+1, y) (strict), row-major, the
top-left comparison is the most significant of the 64 bits.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .catalog import Manifest, load_image
from .imageops import resize_bilinear, to_grayscale

DHASH_COLS = 9
DHASH_ROWS = 8


def compute_dhash(img: np.ndarray) -> int:
    """64-bit difference hash of a decoded raster (HxW or HxWxC)."""
    gray = to_grayscale(img)
    if gray.shape[0] < 1 or gray.shape[1] < 1:
        raise ValueError("bad image: empty raster")
    small = resize_bilinear(gray, DHASH_ROWS, DHASH_COLS)
    bits = small[:, :-1] > small[:, 1:]
    value = 0
    for b in bits.flatten():
        value = (value << 1) | int(b)
    return value


def hamming_distance(a: int, b: int) -> int:
    return ((a ^ b) & ((1 << 64) - 1)).bit_count()


def add_hashes(m: Manifest, root: str | Path | None = None) -> None:
    """Fill the hash field of every record in place."""
    root = Path(root) if root is not None else Path(m.corpus_root)
    for r in m.records:
        if r.hash is None:
            r.hash = compute_dhash(load_image(root / r.path))


def deduplicate(m: Manifest, threshold: int = 0
                ) -> tuple[Manifest, list[tuple[str, str]]]:
    """Greedy single-pass dedup over manifest order.

    A record is dropped iff its hash lies within Hamming distance
    <= threshold of an already-kept record; the first occurrence wins.
    Returns the kept manifest and (duplicate_id, retained_id) pairs.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    for r in m.records:
        if r.hash is None:
            raise ValueError(f"record without hash: {r.id}")

    kept = []
    kept_hashes: list[tuple[int, str]] = []
    exact: dict[int, str] = {}
    removed: list[tuple[str, str]] = []
    for r in m.records:
        assert r.hash is not None
        match = exact.get(r.hash)
        if match is None and threshold > 0:
            for h, rid in kept_hashes:
                if hamming_distance(h, r.hash) <= threshold:
                    match = rid
                    break
        if match is not None:
            removed.append((r.id, match))
            continue
        kept.append(r)
        kept_hashes.append((r.hash, r.id))
        exact.setdefault(r.hash, r.id)

    kept_manifest = Manifest(classes=list(m.classes), records=kept,
                             created=m.created, corpus_root=m.corpus_root)
    return kept_manifest, removed


def save_removed_report(removed: list[tuple[str, str]],
                        path: str | Path) -> None:
    """Two-column text file: duplicate_id retained_id."""
    with Path(path).open("w", encoding="utf-8") as f:
        f.write("duplicate_id\tretained_id\n")
        for dup, ret in removed:
            f.write(f"{dup}\t{ret}\n")
