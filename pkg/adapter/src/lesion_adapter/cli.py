"""Adapter command line: extract backbone features and export predictions.

Exit codes: 0 success, 2 usage error, 4 model load failure (the failing
model name is printed to stderr), 3 other data error. Failures print one
machine-readable JSON line to stderr prefixed with "ERROR ".
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .extract import extract_features
from .predict import predict_rows
from .registry import REGISTRY, ModelLoadError, get_spec
from .wire import (read_manifest, read_split_subset, write_feature_table,
                   write_prediction_log)

log = logging.getLogger("lesion_adapter")


def cmd_extract(args: argparse.Namespace) -> None:
    spec = get_spec(args.model)
    manifest = read_manifest(args.manifest)
    rows = extract_features(manifest, args.model, root=args.root,
                            batch_size=args.batch_size,
                            pretrained=not args.untrained)
    write_feature_table(args.out, manifest.classes, rows, spec.feature_dim)
    log.info("extracted %d x %d features with %s (%s) -> %s",
             len(rows), spec.feature_dim, spec.name, spec.weight_variant,
             args.out)


def cmd_predict(args: argparse.Namespace) -> None:
    manifest = read_manifest(args.manifest)
    spec = get_spec(args.model)
    records = manifest.records
    if args.split is not None:
        keep = read_split_subset(args.split, args.subset)
        records = [r for r in records if r.id in keep]
        manifest.records = records
    rows = extract_features(manifest, args.model, root=args.root,
                            batch_size=args.batch_size,
                            pretrained=not args.untrained)
    preds = predict_rows(args.head, rows, manifest.classes)
    write_prediction_log(args.out, preds)
    log.info("wrote %d predictions with %s head on %s features -> %s",
             len(preds), args.head, spec.name, args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lesionkit-adapter",
        description="Pretrained-backbone feature extraction and prediction "
                    "export in lesionkit wire formats")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--model", required=True, choices=sorted(REGISTRY))
        sp.add_argument("--manifest", required=True, type=Path)
        sp.add_argument("--root", type=Path, default=None,
                        help="corpus root override")
        sp.add_argument("--batch-size", type=int, default=16)
        sp.add_argument("--untrained", action="store_true",
                        help="random-init backbone (no pretrained weights)")
        sp.add_argument("--out", required=True, type=Path)
        return sp

    common(sub.add_parser("extract",
                          help="write a feature table for a manifest"))

    sp = common(sub.add_parser("predict",
                               help="apply a trained head checkpoint"))
    sp.add_argument("--head", required=True, type=Path,
                    help="head checkpoint file")
    sp.add_argument("--split", type=Path, default=None,
                    help="split plan to filter records by subset")
    sp.add_argument("--subset", default="test")

    return p


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "extract":
            cmd_extract(args)
        else:
            cmd_predict(args)
        return 0
    except ModelLoadError as exc:
        print("ERROR " + json.dumps({"kind": "model", "model": args.model,
                                     "error": str(exc)}), file=sys.stderr)
        return 4
    except (ValueError, OSError) as exc:
        print("ERROR " + json.dumps({"kind": "data", "error": str(exc)}),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
