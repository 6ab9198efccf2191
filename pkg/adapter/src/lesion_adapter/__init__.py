"""Pretrained-backbone adapter for the lesionkit wire formats."""

from .registry import REGISTRY, BackboneSpec, ModelLoadError, get_spec
from .extract import build_preprocess, extract_features, load_backbone
from .predict import predict_rows
from .wire import (ManifestFile, ManifestRecord, read_head_checkpoint,
                   read_manifest, read_prediction_log, read_split_subset,
                   write_feature_table, write_prediction_log)

__all__ = [
    "REGISTRY", "BackboneSpec", "ModelLoadError", "get_spec",
    "build_preprocess", "extract_features", "load_backbone",
    "predict_rows",
    "ManifestFile", "ManifestRecord", "read_head_checkpoint",
    "read_manifest", "read_prediction_log", "read_split_subset",
    "write_feature_table", "write_prediction_log",
]
