"""Stratified holdout and stratified k-fold assignment.

Both plans are pure functions of (per-class id lists, parameters, seed).
Per-class test counts follow a fixed rounding rule so they are testable:
clamp(round_half_up(n_c * test_fraction), 1, n_c - 1). Fold membership is
a seeded Fisher-Yates shuffle followed by round-robin assignment, which
forces the <=1 per-class fold imbalance invariant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .catalog import Manifest
from .rng import SplitMix64, derive_seed, shuffled

TRAINVAL = "trainval"
TEST = "test"


class PartitionError(Exception):
    pass


@dataclass
class SplitPlan:
    test_fraction: float
    seed: int
    assignment: dict[str, str]  # id -> "trainval" | "test"

    def subset_ids(self, subset: str) -> list[str]:
        return [i for i, s in self.assignment.items() if s == subset]


@dataclass
class FoldPlan:
    k: int
    seed: int
    fold_of: dict[str, int]  # id -> fold index in [0, k)

    def fold_ids(self, fold: int) -> list[str]:
        return [i for i, f in self.fold_of.items() if f == fold]


def _round_half_up(x: Fraction) -> int:
    import math
    return math.floor(x + Fraction(1, 2))


def holdout_test_count(n: int, test_fraction: float) -> int:
    frac = Fraction(str(test_fraction))
    return min(max(_round_half_up(n * frac), 1), n - 1)


def stratified_holdout(m: Manifest, test_fraction: float,
                       seed: int) -> SplitPlan:
    if not (0.0 < test_fraction < 1.0):
        raise PartitionError(f"test_fraction out of range: {test_fraction}")
    assignment: dict[str, str] = {}
    for cls, recs in m.by_class().items():
        n = len(recs)
        if n < 2:
            raise PartitionError(f"class too small to stratify: {cls} (n={n})")
        n_test = holdout_test_count(n, test_fraction)
        rng = SplitMix64(derive_seed(seed, "holdout", cls))
        order = shuffled([r.id for r in recs], rng)
        for rid in order[:n_test]:
            assignment[rid] = TEST
        for rid in order[n_test:]:
            assignment[rid] = TRAINVAL
    # emit in manifest order for stable serialization
    assignment = {r.id: assignment[r.id] for r in m.records}
    return SplitPlan(test_fraction=test_fraction, seed=seed,
                     assignment=assignment)


def stratified_kfold(m: Manifest, k: int, seed: int,
                     include: set[str] | None = None) -> FoldPlan:
    """Fold the trainval subset (or an explicit id set) per class.

    Per class: seeded shuffle, then item i goes to fold i % k.
    """
    if k < 2:
        raise PartitionError(f"k must be >= 2, got {k}")
    fold_of: dict[str, int] = {}
    for cls, recs in m.by_class().items():
        ids = [r.id for r in recs if include is None or r.id in include]
        if not ids:
            continue
        if len(ids) < k:
            raise PartitionError(
                f"class too small for {k}-fold: {cls} (n={len(ids)})")
        rng = SplitMix64(derive_seed(seed, "fold", cls))
        for i, rid in enumerate(shuffled(ids, rng)):
            fold_of[rid] = i % k
    fold_of = {r.id: fold_of[r.id] for r in m.records if r.id in fold_of}
    return FoldPlan(k=k, seed=seed, fold_of=fold_of)


def verify_partition(m: Manifest, split: SplitPlan,
                     folds: FoldPlan) -> list[str]:
    """Check disjointness, exhaustiveness, leakage and stratification bounds."""
    violations: list[str] = []
    all_ids = set(m.ids())

    assigned = set(split.assignment)
    if assigned != all_ids:
        for missing in sorted(all_ids - assigned):
            violations.append(f"unassigned id: {missing}")
        for extra in sorted(assigned - all_ids):
            violations.append(f"unknown id in split: {extra}")

    test_ids = {i for i, s in split.assignment.items() if s == TEST}
    trainval_ids = {i for i, s in split.assignment.items() if s == TRAINVAL}

    fold_ids = set(folds.fold_of)
    for leaked in sorted(fold_ids & test_ids):
        violations.append(f"leakage: test id in a fold: {leaked}")
    if fold_ids != trainval_ids:
        for missing in sorted(trainval_ids - fold_ids):
            violations.append(f"trainval id missing from folds: {missing}")
        for extra in sorted(fold_ids - trainval_ids - test_ids):
            violations.append(f"unknown id in folds: {extra}")

    label_of = {r.id: r.label for r in m.records}
    # holdout counts per the rounding rule
    per_class = m.by_class()
    for cls, recs in per_class.items():
        n = len(recs)
        want = holdout_test_count(n, split.test_fraction)
        got = sum(1 for r in recs if split.assignment.get(r.id) == TEST)
        if got != want:
            violations.append(
                f"holdout count for {cls}: expected {want}, got {got}")
    # per-class fold balance
    for cls in per_class:
        counts = [0] * folds.k
        for rid, f in folds.fold_of.items():
            if label_of.get(rid) == cls and 0 <= f < folds.k:
                counts[f] += 1
        if counts and max(counts) - min(counts) > 1:
            violations.append(
                f"stratification imbalance for {cls}: fold counts {counts}")
    for rid, f in folds.fold_of.items():
        if not (0 <= f < folds.k):
            violations.append(f"fold index out of range: {rid} -> {f}")
    return violations


def save_split_plan(plan: SplitPlan, path: str | Path) -> None:
    header = json.dumps({"test_fraction": plan.test_fraction,
                         "seed": plan.seed},
                        sort_keys=True, separators=(",", ":"))
    with Path(path).open("w", encoding="utf-8") as f:
        f.write(header + "\n")
        for rid, subset in plan.assignment.items():
            f.write(json.dumps({"id": rid, "subset": subset},
                               sort_keys=True, separators=(",", ":")) + "\n")


def load_split_plan(path: str | Path) -> SplitPlan:
    with Path(path).open("r", encoding="utf-8") as f:
        header = json.loads(f.readline())
        assignment = {}
        for line in f:
            if line.strip():
                d = json.loads(line)
                assignment[d["id"]] = d["subset"]
    return SplitPlan(test_fraction=header["test_fraction"],
                     seed=header["seed"], assignment=assignment)


def save_fold_plan(plan: FoldPlan, path: str | Path) -> None:
    header = json.dumps({"k": plan.k, "seed": plan.seed},
                        sort_keys=True, separators=(",", ":"))
    with Path(path).open("w", encoding="utf-8") as f:
        f.write(header + "\n")
        for rid, fold in plan.fold_of.items():
            f.write(json.dumps({"fold": fold, "id": rid},
                               sort_keys=True, separators=(",", ":")) + "\n")


def load_fold_plan(path: str | Path) -> FoldPlan:
    with Path(path).open("r", encoding="utf-8") as f:
        header = json.loads(f.readline())
        fold_of = {}
        for line in f:
            if line.strip():
                d = json.loads(line)
                fold_of[d["id"]] = int(d["fold"])
    return FoldPlan(k=header["k"], seed=header["seed"], fold_of=fold_of)


def class_count_table(m: Manifest, split: SplitPlan,
                      folds: FoldPlan | None = None) -> str:
    """Human-readable per-class count table for the CLI."""
    label_of = {r.id: r.label for r in m.records}
    lines = []
    header = ["class", "total", "trainval", "test"]
    if folds is not None:
        header += [f"fold{i}" for i in range(folds.k)]
    lines.append("  ".join(f"{h:>10}" for h in header))
    for cls, recs in m.by_class().items():
        ids = [r.id for r in recs]
        row = [cls, str(len(ids)),
               str(sum(1 for i in ids if split.assignment.get(i) == TRAINVAL)),
               str(sum(1 for i in ids if split.assignment.get(i) == TEST))]
        if folds is not None:
            for f in range(folds.k):
                row.append(str(sum(1 for i in ids
                                   if folds.fold_of.get(i) == f)))
        lines.append("  ".join(f"{v:>10}" for v in row))
    return "\n".join(lines)
