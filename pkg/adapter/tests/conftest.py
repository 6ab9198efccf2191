import pytest
import torch

from lesionkit.catalog import save_manifest, scan_dataset
from lesionkit.synth import generate_corpus

from lesion_adapter.wire import read_manifest


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """50-image corpus (5 classes x 10) plus its manifest on disk."""
    root = tmp_path_factory.mktemp("corpus")
    counts = {"dermatitis": 10, "healthy": 10, "lichen_planus": 10,
              "pityriasis_rosea": 10, "psoriasis": 10}
    class_map = generate_corpus(root, counts, seed=5, size=24)
    m = scan_dataset(root, class_map, created="t0")
    path = root / "manifest.jsonl"
    save_manifest(m, path)
    return root, path


@pytest.fixture(scope="session")
def manifest(small_corpus):
    _, path = small_corpus
    return read_manifest(path)


def seeded_backbone(name: str) -> torch.nn.Module:
    """Random-init backbone with a fixed seed, so repeat builds agree."""
    from lesion_adapter.extract import load_backbone
    torch.manual_seed(0)
    return load_backbone(name, pretrained=False)
