"""Readers/writers for the toolkit's wire formats.

These are reimplemented from the documented formats rather than imported,
so the adapter stays decoupled from the toolkit package:

- manifest: line-delimited JSON, one header line then one record per line
  with fields id, path, label, source, width, height, hash
- split plan: header line, then {"id": ..., "subset": "trainval"|"test"}
- feature table: header "dim,<class0>,...", rows "id,label_index,f1,...";
- prediction log: rows "id,true,pred,p_0,...,p_{N-1}"
- head checkpoint: magic "LKCK1\n", JSON header with classes/count/sha256,
  then the flat little-endian float64 parameter array
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class ManifestRecord:
    id: str
    path: str
    label: str


@dataclass
class ManifestFile:
    classes: list[str]
    corpus_root: str
    records: list[ManifestRecord]


def read_manifest(path: str | Path) -> ManifestFile:
    with Path(path).open("r", encoding="utf-8") as f:
        header = json.loads(f.readline())
        records = []
        for line in f:
            if line.strip():
                d = json.loads(line)
                records.append(ManifestRecord(id=d["id"], path=d["path"],
                                              label=d["label"]))
    return ManifestFile(classes=header["classes"],
                        corpus_root=header["corpus_root"], records=records)


def read_split_subset(path: str | Path, subset: str) -> set[str]:
    ids = set()
    with Path(path).open("r", encoding="utf-8") as f:
        f.readline()  # header
        for line in f:
            if line.strip():
                d = json.loads(line)
                if d["subset"] == subset:
                    ids.add(d["id"])
    return ids


def write_feature_table(path: str | Path, classes: list[str],
                        rows: list[tuple[str, int, np.ndarray]],
                        dim: int) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        f.write(",".join([str(dim)] + list(classes)) + "\n")
        for rid, label, vec in rows:
            if vec.size != dim:
                raise ValueError(
                    f"feature dim mismatch for {rid}: {vec.size} != {dim}")
            f.write(f"{rid},{label},"
                    + ",".join(repr(float(v)) for v in vec) + "\n")


def write_prediction_log(path: str | Path,
                         rows: list[tuple[str, str, str, np.ndarray]]
                         ) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        for rid, true, pred, probs in rows:
            f.write(f"{rid},{true},{pred},"
                    + ",".join(repr(float(p)) for p in probs) + "\n")


def read_prediction_log(path: str | Path
                        ) -> list[tuple[str, str, str, np.ndarray]]:
    rows = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                parts = line.rstrip("\n").split(",")
                rows.append((parts[0], parts[1], parts[2],
                             np.array([float(v) for v in parts[3:]])))
    return rows


CKPT_MAGIC = b"LKCK1\n"


def read_head_checkpoint(path: str | Path
                         ) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Returns (classes, weights [C, dim], biases [C])."""
    with Path(path).open("rb") as f:
        if f.read(len(CKPT_MAGIC)) != CKPT_MAGIC:
            raise ValueError(f"not a head checkpoint: {path}")
        header = json.loads(f.readline())
        payload = f.read()
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise ValueError(f"checkpoint checksum mismatch: {path}")
    flat = np.frombuffer(payload, dtype="<f8")
    classes = header["classes"]
    c = len(classes)
    if flat.size % c != 0:
        raise ValueError(f"checkpoint size {flat.size} not divisible by "
                         f"{c} classes")
    dim = flat.size // c - 1
    weights = flat[:c * dim].reshape(c, dim)
    biases = flat[c * dim:]
    return classes, weights, biases
