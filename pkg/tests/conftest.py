import numpy as np
import pytest

from specmorph.config import DetectorConfig
from specmorph.pipeline import Sample
from specmorph.synth import synthesize_pairs


def tiny_config(**overrides) -> DetectorConfig:
    base = dict(image_size=128, patch_size=32, pca_dim=12, seed=0,
                region_mode="preset", workers=1)
    base.update(overrides)
    return DetectorConfig(**base)


def tiny_samples(n_pairs: int = 12, size: int = 128, seed: int = 5,
                 attack: str = "band_boost"):
    clean, pert, _ = synthesize_pairs(n_pairs, size, (1.6, 2.2), (0.4, 0.9), 1.0,
                                      seed=seed)
    out = []
    for i in range(n_pairs):
        out.append(Sample(label=1, image=clean[i]))
        out.append(Sample(label=0, image=pert[i], attack_type=attack))
    return out


@pytest.fixture(scope="session")
def trained_tiny_bundle():
    """One small trained detector shared by pipeline-level tests."""
    from specmorph.pipeline import train_detector
    return train_detector(tiny_samples(14), tiny_config())


@pytest.fixture
def rng():
    return np.random.default_rng(0)
