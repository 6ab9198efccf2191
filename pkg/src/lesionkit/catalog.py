"""Corpus catalog: scan a directory-per-class image tree into a manifest.

The manifest is the join key for every downstream stage. Record ids are
content hashes of the file bytes, so re-scans and moved files keep a stable
identity; note that byte-identical files listed under two paths therefore
share an id until the dedup stage removes one of them.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

log = logging.getLogger(__name__)

IMG_EXTS = {".png", ".jpg", ".jpeg"}

# 9x8 downscale is the smallest raster the perceptual hash accepts without
# upscaling; records below it are skipped at scan time.
MIN_WIDTH = 9
MIN_HEIGHT = 8


class CatalogError(Exception):
    """Fatal catalog problem (missing root, empty class)."""


@dataclass
class ImageRecord:
    id: str
    path: str
    label: str
    source: str
    width: int
    height: int
    hash: Optional[int] = None  # 64-bit dHash, filled by the dedup stage

    def to_json_line(self) -> str:
        d = {
            "id": self.id,
            "path": self.path,
            "label": self.label,
            "source": self.source,
            "width": self.width,
            "height": self.height,
            "hash": f"{self.hash:016x}" if self.hash is not None else None,
        }
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json_line(line: str) -> "ImageRecord":
        d = json.loads(line)
        h = d.get("hash")
        return ImageRecord(
            id=d["id"], path=d["path"], label=d["label"], source=d["source"],
            width=int(d["width"]), height=int(d["height"]),
            hash=int(h, 16) if h is not None else None,
        )


@dataclass
class Manifest:
    classes: list[str]
    records: list[ImageRecord]
    created: str
    corpus_root: str

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def by_class(self) -> dict[str, list[ImageRecord]]:
        out: dict[str, list[ImageRecord]] = {c: [] for c in self.classes}
        for r in self.records:
            out.setdefault(r.label, []).append(r)
        return out


def _content_id(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as f:
        while chunk := f.read(1 << 20):
            h.update(chunk)
    return h.hexdigest()


def load_image(path: str | Path) -> np.ndarray:
    """Decode an image file to an HxW[xC] uint8 array."""
    try:
        with Image.open(path) as im:
            im = im.convert("RGB") if im.mode not in ("L", "RGB") else im
            return np.asarray(im)
    except (UnidentifiedImageError, OSError) as exc:
        raise CatalogError(f"bad image: {path}: {exc}") from exc


def scan_dataset(root: str | Path, class_map: dict[str, str],
                 created: str | None = None) -> Manifest:
    """Build a manifest from a corpus root and a directory-to-class mapping.

    Undecodable or undersized files are logged and skipped, never fatal.
    A mapped class with zero decodable images is fatal. Record order is
    lexicographic by path, independent of filesystem enumeration order.
    """
    root = Path(root)
    if not root.is_dir():
        raise CatalogError(f"corpus root not found: {root}")

    classes = sorted(set(class_map.values()))
    records: list[ImageRecord] = []
    per_class_counts = {c: 0 for c in classes}

    for subdir in sorted(class_map):
        label = class_map[subdir]
        d = root / subdir
        if not d.is_dir():
            raise CatalogError(f"mapped directory not found: {d}")
        for p in sorted(d.rglob("*")):
            if not p.is_file() or p.suffix.lower() not in IMG_EXTS:
                continue
            try:
                with Image.open(p) as im:
                    width, height = im.size
            except (UnidentifiedImageError, OSError):
                log.warning("skipping undecodable file: %s", p)
                continue
            if width < MIN_WIDTH or height < MIN_HEIGHT:
                log.warning("skipping undersized image (%dx%d): %s",
                            width, height, p)
                continue
            records.append(ImageRecord(
                id=_content_id(p),
                path=str(p.relative_to(root)),
                label=label,
                source=subdir,
                width=width,
                height=height,
            ))
            per_class_counts[label] += 1

    for c, n in per_class_counts.items():
        if n == 0:
            raise CatalogError(f"empty class: {c}")

    records.sort(key=lambda r: r.path)
    if created is None:
        created = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return Manifest(classes=classes, records=records, created=created,
                    corpus_root=str(root))


def validate_manifest(m: Manifest) -> list[str]:
    """Return every invariant violation; empty list iff the manifest is valid."""
    violations: list[str] = []
    if not m.classes:
        violations.append("empty class list")
    if len(set(m.classes)) != len(m.classes):
        violations.append("duplicate class names")
    seen: dict[str, str] = {}
    for r in m.records:
        if r.id in seen:
            violations.append(f"duplicate id: {r.id} ({seen[r.id]} / {r.path})")
        else:
            seen[r.id] = r.path
        if r.label not in m.classes:
            violations.append(f"unknown label: {r.label} ({r.path})")
        if r.width < MIN_WIDTH or r.height < MIN_HEIGHT:
            violations.append(
                f"sub-minimum dimensions {r.width}x{r.height}: {r.path}")
    return violations


def save_manifest(m: Manifest, path: str | Path) -> None:
    """Line-delimited JSON: one header line, then one record per line."""
    header = json.dumps(
        {"classes": m.classes, "created": m.created,
         "corpus_root": m.corpus_root},
        sort_keys=True, separators=(",", ":"))
    with Path(path).open("w", encoding="utf-8") as f:
        f.write(header + "\n")
        for r in m.records:
            f.write(r.to_json_line() + "\n")


def load_manifest(path: str | Path) -> Manifest:
    with Path(path).open("r", encoding="utf-8") as f:
        header = json.loads(f.readline())
        records = [ImageRecord.from_json_line(line)
                   for line in f if line.strip()]
    return Manifest(classes=header["classes"], records=records,
                    created=header["created"],
                    corpus_root=header["corpus_root"])
