import os

import numpy as np
import pytest

from clfa.common.config import TrainConfig, deep_merge
from clfa.common.utils import make_rng
from clfa.data import SyntheticFactorSpec, make_synthetic_splits, sample_triple_batch, write_folder_dataset
from clfa.transforms import TransformBank


TINY_MODEL = {
    "backbone": "tiny_cnn",
    "feature_dim": 8,
    "z_dim": 4,
    "encoder_hidden": 8,
    "augmentor_hidden": 8,
    "num_classes": 3,
    "image_size": 16,
    "backbone_width": 4,
}

TINY_TRAIN = {
    "dataset_tag": "synthetic",
    "max_iters": 20,
    "base_lr": 1e-3,
    "triples_per_class": 2,
    "eval_every": 0,
    "checkpoint_every": 0,
    "log_every": 5,
    "deterministic": True,
    "model": TINY_MODEL,
    "weights": { "lambda_samples": 1, "pairing": "full_product" },
}


@pytest.fixture(autouse=True)
def _clean_environment(monkeypatch):
    for var in ("CLFA_SEED", "CLFA_DEVICE", "CLFA_LOG_LEVEL"):
        monkeypatch.delenv(var, raising=False)


@pytest.fixture
def make_config():
    """Factory for a tiny TrainConfig: d=8, z_dim=4, K=3, 16x16 images, λ=1, full-product pairing."""
    def factory(**overrides) -> TrainConfig:
        return TrainConfig.model_validate(deep_merge(TINY_TRAIN, overrides))
    return factory


@pytest.fixture(scope="session")
def synthetic_spec():
    return SyntheticFactorSpec(num_classes=3, image_size=16, n_train_per_class=20, n_test_per_class=20, seed=0)


@pytest.fixture(scope="session")
def synthetic_splits(synthetic_spec):
    return make_synthetic_splits(synthetic_spec)


@pytest.fixture(scope="session")
def train_ds(synthetic_splits):
    return synthetic_splits["train"]


@pytest.fixture
def triple_batch(train_ds):
    """One triple per class."""
    return sample_triple_batch(train_ds, 1, make_rng(0), TransformBank(), "synthetic")


@pytest.fixture
def random_image():
    return make_rng(1).uniform(0.0, 1.0, size=(16, 16, 3)).astype(np.float32)


@pytest.fixture
def folder_dataset(tmp_path, synthetic_splits):
    """The synthetic training split written as root/<class>/<image>.png."""
    root = os.path.join(tmp_path, "folder_ds")
    write_folder_dataset(synthetic_splits["train"], root)
    return root
