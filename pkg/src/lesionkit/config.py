"""Run configuration: one JSON document driving every pipeline stage.

A frozen copy of the config is written next to each run's artifacts, so
any report can be reproduced from its output directory alone. The
`created` field, when set, is stamped into the manifest; identical configs
therefore yield byte-identical artifacts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .augment import AugmentPolicy
from .trainctl import TrainLoopConfig


class ConfigError(ValueError):
    pass


@dataclass
class ModelSpec:
    name: str
    input_size: int
    feature_dim: int
    params_millions: float | None = None
    source: str = "builtin"


# The pretrained-backbone roster; input sizes and feature dims are
# configuration, not constants, and the external adapter validates against
# them.
DEFAULT_REGISTRY = {
    "pixels8": ModelSpec("pixels8", 8, 192, None, "builtin"),
    "inception_v3": ModelSpec("inception_v3", 299, 2048, 27.2, "torchvision"),
    "efficientnet_v2_l": ModelSpec("efficientnet_v2_l", 480, 1280, 118.5,
                                   "torchvision"),
    "convnext_large": ModelSpec("convnext_large", 224, 1536, 197.8,
                                "torchvision"),
    "vit_l_16": ModelSpec("vit_l_16", 224, 1024, 304.3, "torchvision"),
    "maxvit_t": ModelSpec("maxvit_t", 224, 512, 30.9, "torchvision"),
    "davit_b": ModelSpec("davit_b", 224, 1024, 88.0, "timm"),
}


@dataclass
class RunConfig:
    corpus_root: str
    class_map: dict[str, str]
    dedup_threshold: int = 0
    test_fraction: float = 0.2
    k: int = 5
    seed: int = 0
    created: str | None = None
    feature_side: int = 8
    model: str = "pixels8"
    augment: AugmentPolicy = field(default_factory=AugmentPolicy)
    train: TrainLoopConfig = field(default_factory=TrainLoopConfig)
    plateau_factor: float = 1e-3
    plateau_patience: int = 3
    min_lr: float = 0.0
    stop_patience: int = 7
    registry: dict[str, ModelSpec] = field(
        default_factory=lambda: dict(DEFAULT_REGISTRY))

    def validate(self) -> None:
        if not Path(self.corpus_root).is_dir():
            raise ConfigError(f"corpus_root not found: {self.corpus_root}")
        if not self.class_map:
            raise ConfigError("class_map is empty")
        for d in self.class_map:
            if not (Path(self.corpus_root) / d).is_dir():
                raise ConfigError(f"mapped directory not found: {d}")
        if self.dedup_threshold < 0:
            raise ConfigError("dedup_threshold must be >= 0")
        if not (0.0 < self.test_fraction < 1.0):
            raise ConfigError(
                f"test_fraction out of range: {self.test_fraction}")
        if self.k < 2:
            raise ConfigError(f"k must be >= 2: {self.k}")
        if self.model not in self.registry:
            raise ConfigError(f"unknown model: {self.model}")
        if not (0.0 < self.plateau_factor < 1.0):
            raise ConfigError(
                f"plateau_factor out of range: {self.plateau_factor}")
        if self.plateau_patience <= 0 or self.stop_patience <= 0:
            raise ConfigError("patience values must be positive")

    def to_dict(self) -> dict:
        return {
            "corpus_root": self.corpus_root,
            "class_map": self.class_map,
            "dedup_threshold": self.dedup_threshold,
            "test_fraction": self.test_fraction,
            "k": self.k,
            "seed": self.seed,
            "created": self.created,
            "feature_side": self.feature_side,
            "model": self.model,
            "augment": {
                "rotation_max_deg": self.augment.rotation_max_deg,
                "hflip_prob": self.augment.hflip_prob,
                "vflip_prob": self.augment.vflip_prob,
                "target_size": list(self.augment.target_size),
                "normalize": self.augment.normalize,
            },
            "train": {
                "max_epochs": self.train.max_epochs,
                "batch_size": self.train.batch_size,
                "initial_lr": self.train.initial_lr,
            },
            "plateau_factor": self.plateau_factor,
            "plateau_patience": self.plateau_patience,
            "min_lr": self.min_lr,
            "stop_patience": self.stop_patience,
            "registry": {
                name: {"input_size": s.input_size,
                       "feature_dim": s.feature_dim,
                       "params_millions": s.params_millions,
                       "source": s.source}
                for name, s in self.registry.items()
            },
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8")


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    try:
        aug = raw.get("augment", {})
        policy = AugmentPolicy(
            rotation_max_deg=aug.get("rotation_max_deg", 20.0),
            hflip_prob=aug.get("hflip_prob", 0.5),
            vflip_prob=aug.get("vflip_prob", 0.5),
            target_size=tuple(aug.get("target_size", (224, 224))),
            normalize=aug.get("normalize", True),
        )
        tr = raw.get("train", {})
        train = TrainLoopConfig(
            max_epochs=tr.get("max_epochs", 50),
            batch_size=tr.get("batch_size", 32),
            initial_lr=tr.get("initial_lr", 0.002),
        )
        registry = dict(DEFAULT_REGISTRY)
        for name, s in raw.get("registry", {}).items():
            registry[name] = ModelSpec(
                name=name, input_size=int(s["input_size"]),
                feature_dim=int(s["feature_dim"]),
                params_millions=s.get("params_millions"),
                source=s.get("source", "custom"))
        return RunConfig(
            corpus_root=raw["corpus_root"],
            class_map=dict(raw["class_map"]),
            dedup_threshold=int(raw.get("dedup_threshold", 0)),
            test_fraction=float(raw.get("test_fraction", 0.2)),
            k=int(raw.get("k", 5)),
            seed=int(raw.get("seed", 0)),
            created=raw.get("created"),
            feature_side=int(raw.get("feature_side", 8)),
            model=raw.get("model", "pixels8"),
            augment=policy,
            train=train,
            plateau_factor=float(raw.get("plateau_factor", 1e-3)),
            plateau_patience=int(raw.get("plateau_patience", 3)),
            min_lr=float(raw.get("min_lr", 0.0)),
            stop_patience=int(raw.get("stop_patience", 7)),
            registry=registry,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
