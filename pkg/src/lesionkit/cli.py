"""Command-line entry point wiring all pipeline stages.

Exit codes: 0 success, 2 configuration error, 3 data error. Failures print
one machine-readable JSON line to stderr prefixed with "ERROR ".
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import catalog, dedup, partition
from .augment import apply_pipeline
from .catalog import CatalogError, load_manifest, save_manifest, scan_dataset
from .config import ConfigError, RunConfig, load_config
from .features import extract_pixel_features
from .metrics import (MetricsError, aggregate_folds, compute_metrics,
                      confusion_from_log, save_report)
from .partition import (PartitionError, class_count_table, load_fold_plan,
                        load_split_plan, save_fold_plan, save_split_plan,
                        stratified_holdout, stratified_kfold,
                        verify_partition)
from .refmodel import (load_feature_table, load_prediction_log, predict,
                       save_feature_table, save_prediction_log, train_head,
                       LinearHead)
from .report import render_table, render_table_csv, save_heatmap
from .rng import derive_seed
from .trainctl import (CheckpointPolicy, EarlyStopper, PlateauScheduler,
                       load_checkpoint, save_history)

log = logging.getLogger("lesionkit")


class DataError(Exception):
    pass


def _emit(path: Path) -> None:
    print(f"wrote {path}")


def _scheduler(cfg: RunConfig) -> PlateauScheduler:
    return PlateauScheduler(lr=cfg.train.initial_lr,
                            factor=cfg.plateau_factor,
                            patience=cfg.plateau_patience,
                            min_lr=cfg.min_lr)


def cmd_ingest(cfg: RunConfig, out: Path) -> None:
    m = scan_dataset(cfg.corpus_root, cfg.class_map, created=cfg.created)
    violations = catalog.validate_manifest(m)
    for v in violations:
        if not v.startswith("duplicate id"):  # duplicates are dedup's job
            raise DataError(f"manifest violation: {v}")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_manifest(m, out)
    _emit(out)
    print(f"{len(m.records)} records, classes: {', '.join(m.classes)}")


def cmd_dedup(cfg: RunConfig, manifest_path: Path, out: Path,
              removed_path: Path, threshold: int | None) -> None:
    m = load_manifest(manifest_path)
    dedup.add_hashes(m, root=cfg.corpus_root)
    t = cfg.dedup_threshold if threshold is None else threshold
    kept, removed = dedup.deduplicate(m, t)
    save_manifest(kept, out)
    dedup.save_removed_report(removed, removed_path)
    _emit(out)
    _emit(removed_path)
    print(f"kept {len(kept.records)}, removed {len(removed)} "
          f"(threshold {t})")


def cmd_split(cfg: RunConfig, manifest_path: Path, out_split: Path,
              out_folds: Path) -> None:
    m = load_manifest(manifest_path)
    split = stratified_holdout(m, cfg.test_fraction, cfg.seed)
    trainval = set(split.subset_ids(partition.TRAINVAL))
    folds = stratified_kfold(m, cfg.k, cfg.seed, include=trainval)
    violations = verify_partition(m, split, folds)
    if violations:
        raise DataError("; ".join(violations))
    save_split_plan(split, out_split)
    save_fold_plan(folds, out_folds)
    _emit(out_split)
    _emit(out_folds)
    print(class_count_table(m, split, folds))


def cmd_augment_preview(cfg: RunConfig, manifest_path: Path, out_dir: Path,
                        epoch: int, limit: int) -> None:
    m = load_manifest(manifest_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    for r in m.records[:limit]:
        img = catalog.load_image(Path(cfg.corpus_root) / r.path)
        tensor = apply_pipeline(img, cfg.augment, master_seed=cfg.seed,
                                record_id=r.id, epoch=epoch, training=True)
        arr = np.clip(np.round(tensor * 255.0), 0, 255).astype(np.uint8)
        p = out_dir / f"{r.id}_{epoch}.png"
        Image.fromarray(arr).save(p)
        _emit(p)


def cmd_extract(cfg: RunConfig, manifest_path: Path, out: Path,
                augmented: bool, epoch: int,
                include_ids: set[str] | None) -> None:
    m = load_manifest(manifest_path)
    table = extract_pixel_features(
        m, cfg.feature_side,
        policy=cfg.augment if augmented else None,
        training=augmented, master_seed=cfg.seed, epoch=epoch,
        include=include_ids, root=cfg.corpus_root)
    save_feature_table(table, out)
    _emit(out)


def cmd_train_head(cfg: RunConfig, features_path: Path,
                   aug_features_path: Path | None, folds_path: Path,
                   fold: int, out_dir: Path) -> None:
    features = load_feature_table(features_path)
    aug = (load_feature_table(aug_features_path)
           if aug_features_path else None)
    folds = load_fold_plan(folds_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = CheckpointPolicy(directory=out_dir, classes=features.classes)
    head, history = train_head(
        features, folds.fold_of, fold, cfg.train, _scheduler(cfg),
        EarlyStopper(patience=cfg.stop_patience),
        seed=derive_seed(cfg.seed, "train", fold),
        ckpt=ckpt, train_features=aug)
    save_history(history, out_dir / "history.jsonl")
    _emit(ckpt.path)
    _emit(out_dir / "history.jsonl")


def cmd_evaluate(log_path: Path, classes: list[str],
                 out: Path | None) -> None:
    rows = load_prediction_log(log_path)
    cm = confusion_from_log(rows, classes)
    report = compute_metrics(cm)
    if out is not None:
        save_report(report, out)
        _emit(out)
    else:
        print(report.to_json())


def cmd_report(entries: list[tuple[str, str, Path]], out_dir: Path,
               heatmap_log: Path | None, classes: list[str]) -> None:
    from .metrics import MetricReport
    rows = []
    for name, params, path in entries:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        report = MetricReport(
            classes=raw["classes"], support=raw["support"],
            per_class=raw["per_class"], row_percent=raw["row_percent"],
            flags=raw["flags"],
            **{k: raw[k] for k in MetricReport.SCALARS})
        rows.append((name, params, report))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "comparison.txt").write_text(render_table(rows),
                                            encoding="utf-8")
    (out_dir / "comparison.csv").write_text(render_table_csv(rows),
                                            encoding="utf-8")
    _emit(out_dir / "comparison.txt")
    _emit(out_dir / "comparison.csv")
    if heatmap_log is not None:
        cm = confusion_from_log(load_prediction_log(heatmap_log), classes)
        save_heatmap(cm, out_dir / "confusion.svg")
        _emit(out_dir / "confusion.svg")


def run_pipeline(cfg: RunConfig, out: Path) -> dict:
    """All stages: ingest, dedup, split, features, per-fold head training,
    aggregation, test evaluation, report artifacts."""
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")

    m = scan_dataset(cfg.corpus_root, cfg.class_map, created=cfg.created)
    save_manifest(m, out / "manifest_raw.jsonl")
    dedup.add_hashes(m, root=cfg.corpus_root)
    kept, removed = dedup.deduplicate(m, cfg.dedup_threshold)
    save_manifest(kept, out / "manifest.jsonl")
    dedup.save_removed_report(removed, out / "removed.txt")
    violations = catalog.validate_manifest(kept)
    if violations:
        raise DataError("; ".join(violations))

    split = stratified_holdout(kept, cfg.test_fraction, cfg.seed)
    trainval = set(split.subset_ids(partition.TRAINVAL))
    test_ids = set(split.subset_ids(partition.TEST))
    folds = stratified_kfold(kept, cfg.k, cfg.seed, include=trainval)
    part_violations = verify_partition(kept, split, folds)
    if part_violations:
        raise DataError("; ".join(part_violations))
    save_split_plan(split, out / "split.jsonl")
    save_fold_plan(folds, out / "folds.jsonl")
    print(class_count_table(kept, split, folds))

    # validation/test rows always come from the clean table; training rows
    # from the augmented one
    clean = extract_pixel_features(kept, cfg.feature_side,
                                   root=cfg.corpus_root)
    augmented = extract_pixel_features(
        kept, cfg.feature_side, policy=cfg.augment, training=True,
        master_seed=cfg.seed, include=trainval, root=cfg.corpus_root)
    save_feature_table(clean, out / "features.csv")
    save_feature_table(augmented, out / "features_train.csv")

    fold_reports = []
    best: tuple[float, int, LinearHead] | None = None
    for f in range(cfg.k):
        fold_dir = out / "folds" / f"fold{f}"
        fold_dir.mkdir(parents=True, exist_ok=True)
        ckpt = CheckpointPolicy(directory=fold_dir, classes=kept.classes)
        head, history = train_head(
            clean, folds.fold_of, f, cfg.train, _scheduler(cfg),
            EarlyStopper(patience=cfg.stop_patience),
            seed=derive_seed(cfg.seed, "train", f),
            ckpt=ckpt, train_features=augmented)
        save_history(history, fold_dir / "history.jsonl")
        val_ids = {i for i, fo in folds.fold_of.items() if fo == f}
        val_rows = predict(head, clean, ids=val_ids)
        save_prediction_log(val_rows, fold_dir / "predictions_val.csv")
        report = compute_metrics(confusion_from_log(val_rows, kept.classes))
        save_report(report, fold_dir / "metrics_val.json")
        fold_reports.append((report, len(val_rows)))
        fold_best_acc = max((e.val_acc for e in history), default=0.0)
        if best is None or fold_best_acc > best[0]:
            best = (fold_best_acc, f, head)

    aggregate = aggregate_folds(fold_reports)
    save_report(aggregate, out / "metrics_cv.json")
    _emit(out / "metrics_cv.json")

    assert best is not None
    _, best_fold, best_head = best
    test_rows = predict(best_head, clean, ids=test_ids)
    save_prediction_log(test_rows, out / "predictions_test.csv")
    cm_test = confusion_from_log(test_rows, kept.classes)
    test_report = compute_metrics(cm_test)
    save_report(test_report, out / "metrics_test.json")
    save_heatmap(cm_test, out / "confusion_test.svg",
                 title=f"{cfg.model} (fold {best_fold} head)")
    spec = cfg.registry[cfg.model]
    params = (f"{spec.params_millions}M"
              if spec.params_millions is not None else "-")
    table_rows = [(cfg.model, params, aggregate)]
    (out / "report.txt").write_text(render_table(table_rows),
                                    encoding="utf-8")
    (out / "report.csv").write_text(render_table_csv(table_rows),
                                    encoding="utf-8")
    for name in ("manifest.jsonl", "split.jsonl", "folds.jsonl",
                 "metrics_test.json", "confusion_test.svg", "report.txt"):
        _emit(out / name)
    print(f"fold-aggregated weighted F1: {aggregate.f1_weighted:.4f}")
    return {"cv": aggregate.to_dict(), "test": test_report.to_dict(),
            "best_fold": best_fold}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lesionkit",
        description="Dataset curation and evaluation pipeline for "
                    "multiclass skin-lesion classification")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", required=True, type=Path)
        return sp

    sp = with_config(sub.add_parser("ingest", help="scan corpus to manifest"))
    sp.add_argument("--out", required=True, type=Path)

    sp = with_config(sub.add_parser("dedup", help="hash and deduplicate"))
    sp.add_argument("--manifest", required=True, type=Path)
    sp.add_argument("--out", required=True, type=Path)
    sp.add_argument("--removed", required=True, type=Path)
    sp.add_argument("--threshold", type=int, default=None)

    sp = with_config(sub.add_parser("split",
                                    help="stratified holdout + k folds"))
    sp.add_argument("--manifest", required=True, type=Path)
    sp.add_argument("--out-split", required=True, type=Path)
    sp.add_argument("--out-folds", required=True, type=Path)

    sp = with_config(sub.add_parser("augment-preview",
                                    help="materialize augmented samples"))
    sp.add_argument("--manifest", required=True, type=Path)
    sp.add_argument("--out", required=True, type=Path)
    sp.add_argument("--epoch", type=int, default=0)
    sp.add_argument("--limit", type=int, default=8)

    sp = with_config(sub.add_parser("extract-features",
                                    help="builtin pixel features"))
    sp.add_argument("--manifest", required=True, type=Path)
    sp.add_argument("--out", required=True, type=Path)
    sp.add_argument("--augmented", action="store_true")
    sp.add_argument("--epoch", type=int, default=0)

    sp = with_config(sub.add_parser("train-head",
                                    help="train the dense head on one fold"))
    sp.add_argument("--features", required=True, type=Path)
    sp.add_argument("--aug-features", type=Path, default=None)
    sp.add_argument("--folds", required=True, type=Path)
    sp.add_argument("--fold", required=True, type=int)
    sp.add_argument("--out", required=True, type=Path)

    sp = sub.add_parser("evaluate", help="metric report from a prediction log")
    sp.add_argument("--log", required=True, type=Path)
    sp.add_argument("--classes", required=True,
                    help="comma-separated ordered class names")
    sp.add_argument("--out", type=Path, default=None)

    sp = sub.add_parser("report", help="comparison table + heatmap")
    sp.add_argument("--out", required=True, type=Path)
    sp.add_argument("--heatmap-log", type=Path, default=None)
    sp.add_argument("--classes", default="")
    sp.add_argument("entries", nargs="+",
                    help="NAME=metrics.json or NAME:PARAMS=metrics.json")

    sp = with_config(sub.add_parser("pipeline", help="run all stages"))
    sp.add_argument("--out", required=True, type=Path)

    return p


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, which matches the config-error code
        return int(exc.code or 0)

    try:
        if args.command == "evaluate":
            classes = [c for c in args.classes.split(",") if c]
            cmd_evaluate(args.log, classes, args.out)
            return 0
        if args.command == "report":
            entries = []
            for e in args.entries:
                name, _, path = e.partition("=")
                if not path:
                    raise ConfigError(f"bad report entry: {e}")
                name, _, params = name.partition(":")
                entries.append((name, params or "-", Path(path)))
            classes = [c for c in args.classes.split(",") if c]
            cmd_report(entries, args.out, args.heatmap_log, classes)
            return 0

        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.validate()

        if args.command == "ingest":
            cmd_ingest(cfg, args.out)
        elif args.command == "dedup":
            cmd_dedup(cfg, args.manifest, args.out, args.removed,
                      args.threshold)
        elif args.command == "split":
            cmd_split(cfg, args.manifest, args.out_split, args.out_folds)
        elif args.command == "augment-preview":
            cmd_augment_preview(cfg, args.manifest, args.out, args.epoch,
                                args.limit)
        elif args.command == "extract-features":
            cmd_extract(cfg, args.manifest, args.out, args.augmented,
                        args.epoch, None)
        elif args.command == "train-head":
            cmd_train_head(cfg, args.features, args.aug_features,
                           args.folds, args.fold, args.out)
        elif args.command == "pipeline":
            run_pipeline(cfg, args.out)
        return 0
    except ConfigError as exc:
        print("ERROR " + json.dumps({"kind": "config", "error": str(exc)}),
              file=sys.stderr)
        return 2
    except (DataError, CatalogError, PartitionError, MetricsError,
            ValueError, OSError) as exc:
        print("ERROR " + json.dumps({"kind": "data", "error": str(exc)}),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
