"""Backbone roster: the six pretrained models, their input sizes, feature
dimensions and parameter counts (metadata only).

The pinned weight variants are the torchvision "IMAGENET1K_V1" checkpoints
(DaViT-B via timm `davit_base.msft_in1k`); the variant tag is recorded in
run metadata by the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass


class ModelLoadError(RuntimeError):
    """Backbone weights or implementation unavailable."""


@dataclass(frozen=True)
class BackboneSpec:
    name: str
    source: str            # "torchvision" | "timm"
    input_size: int
    feature_dim: int
    params_millions: float
    weight_variant: str


REGISTRY: dict[str, BackboneSpec] = {
    "inception_v3": BackboneSpec(
        "inception_v3", "torchvision", 299, 2048, 27.2, "IMAGENET1K_V1"),
    "efficientnet_v2_l": BackboneSpec(
        "efficientnet_v2_l", "torchvision", 480, 1280, 118.5,
        "IMAGENET1K_V1"),
    "convnext_large": BackboneSpec(
        "convnext_large", "torchvision", 224, 1536, 197.8, "IMAGENET1K_V1"),
    "vit_l_16": BackboneSpec(
        "vit_l_16", "torchvision", 224, 1024, 304.3, "IMAGENET1K_V1"),
    "maxvit_t": BackboneSpec(
        "maxvit_t", "torchvision", 224, 512, 30.9, "IMAGENET1K_V1"),
    "davit_b": BackboneSpec(
        "davit_b", "timm", 224, 1024, 88.0, "davit_base.msft_in1k"),
}


def get_spec(name: str) -> BackboneSpec:
    if name not in REGISTRY:
        raise ModelLoadError(
            f"unknown model: {name} (known: {', '.join(sorted(REGISTRY))})")
    return REGISTRY[name]
