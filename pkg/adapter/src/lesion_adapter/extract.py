"""Penultimate-layer feature extraction with pretrained backbones.

Each backbone is loaded with its classification head replaced by an
identity, so the forward pass yields the pooled penultimate features.
Images are read in manifest order, preprocessed with the standard
ImageNet recipe at the model's native input size, and pushed through in
fixed-size batches under `torch.no_grad`, so extraction is deterministic
for a given manifest and model.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torchvision import models, transforms

from .registry import BackboneSpec, ModelLoadError, get_spec
from .wire import ManifestFile

IMAGENET_MEAN = [0.485, 0.456, 0.406]
IMAGENET_STD = [0.229, 0.224, 0.225]


def _torchvision_backbone(spec: BackboneSpec,
                          pretrained: bool) -> torch.nn.Module:
    builder = getattr(models, spec.name)
    weights = spec.weight_variant if pretrained else None
    kwargs = {"weights": weights}
    if spec.name == "inception_v3":
        # aux head only matters for training; init_weights skips the slow
        # truncated-normal init when running untrained
        kwargs["aux_logits"] = True
        kwargs["init_weights"] = False
    try:
        model = builder(**kwargs)
    except Exception as exc:  # weight download or build failure
        raise ModelLoadError(f"cannot build {spec.name}: {exc}") from exc
    # strip the classification head, keeping the pooled features
    if spec.name == "inception_v3":
        model.fc = torch.nn.Identity()
    elif spec.name == "efficientnet_v2_l":
        model.classifier = torch.nn.Identity()
    elif spec.name == "convnext_large":
        model.classifier[2] = torch.nn.Identity()
    elif spec.name == "vit_l_16":
        model.heads = torch.nn.Identity()
    elif spec.name == "maxvit_t":
        model.classifier[-1] = torch.nn.Identity()
    else:
        raise ModelLoadError(f"no head-replacement rule for {spec.name}")
    return model


def _timm_backbone(spec: BackboneSpec, pretrained: bool) -> torch.nn.Module:
    try:
        import timm
    except ImportError as exc:
        raise ModelLoadError(
            f"{spec.name} requires the optional timm dependency "
            f"(pip install lesionkit-adapter[timm])") from exc
    try:
        return timm.create_model(spec.weight_variant, pretrained=pretrained,
                                 num_classes=0)
    except Exception as exc:
        raise ModelLoadError(f"cannot build {spec.name}: {exc}") from exc


def load_backbone(name: str, *, pretrained: bool = True) -> torch.nn.Module:
    """Headless backbone in eval mode; raises ModelLoadError on failure."""
    spec = get_spec(name)
    if spec.source == "torchvision":
        model = _torchvision_backbone(spec, pretrained)
    else:
        model = _timm_backbone(spec, pretrained)
    model.eval()
    return model


def build_preprocess(spec: BackboneSpec) -> transforms.Compose:
    return transforms.Compose([
        transforms.Resize((spec.input_size, spec.input_size)),
        transforms.ToTensor(),
        transforms.Normalize(IMAGENET_MEAN, IMAGENET_STD),
    ])


def extract_features(manifest: ManifestFile, model_name: str, *,
                     model: torch.nn.Module | None = None,
                     root: str | Path | None = None,
                     batch_size: int = 16,
                     pretrained: bool = True
                     ) -> list[tuple[str, int, np.ndarray]]:
    """One (id, label_index, feature_vector) per manifest record, in
    manifest order."""
    spec = get_spec(model_name)
    if model is None:
        model = load_backbone(model_name, pretrained=pretrained)
    pre = build_preprocess(spec)
    base = Path(root) if root is not None else Path(manifest.corpus_root)
    label_index = {c: i for i, c in enumerate(manifest.classes)}

    rows: list[tuple[str, int, np.ndarray]] = []
    with torch.no_grad():
        for start in range(0, len(manifest.records), batch_size):
            chunk = manifest.records[start:start + batch_size]
            tensors = []
            for rec in chunk:
                with Image.open(base / rec.path) as im:
                    tensors.append(pre(im.convert("RGB")))
            out = model(torch.stack(tensors))
            feats = out.cpu().numpy().astype(np.float64)
            if feats.ndim != 2 or feats.shape[1] != spec.feature_dim:
                raise ModelLoadError(
                    f"{model_name} produced shape {feats.shape}, expected "
                    f"(*, {spec.feature_dim})")
            for rec, vec in zip(chunk, feats):
                rows.append((rec.id, label_index[rec.label], vec))
    return rows
