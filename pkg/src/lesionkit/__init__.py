"""lesionkit: deterministic dataset-curation and evaluation pipeline for
multiclass skin-lesion classification."""

__version__ = "0.1.0"

from .catalog import ImageRecord, Manifest, scan_dataset, validate_manifest
from .dedup import compute_dhash, deduplicate, hamming_distance
from .metrics import (ConfusionMatrix, MetricReport, aggregate_folds,
                      compute_metrics, confusion_from_log, normalize_rows)
from .partition import (FoldPlan, SplitPlan, stratified_holdout,
                        stratified_kfold, verify_partition)
from .refmodel import (AdaMaxState, FeatureTable, LinearHead, adamax_step,
                       forward, loss_and_grad, predict, train_head)
from .trainctl import (EarlyStopper, PlateauScheduler, TrainLoopConfig,
                       run_training_loop)

__all__ = [
    "ImageRecord", "Manifest", "scan_dataset", "validate_manifest",
    "compute_dhash", "deduplicate", "hamming_distance",
    "ConfusionMatrix", "MetricReport", "aggregate_folds", "compute_metrics",
    "confusion_from_log", "normalize_rows",
    "FoldPlan", "SplitPlan", "stratified_holdout", "stratified_kfold",
    "verify_partition",
    "AdaMaxState", "FeatureTable", "LinearHead", "adamax_step", "forward",
    "loss_and_grad", "predict", "train_head",
    "EarlyStopper", "PlateauScheduler", "TrainLoopConfig",
    "run_training_loop",
]
