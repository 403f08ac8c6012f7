# DOC: Desk-scale generalization study on the controllable-factor dataset: 4 shapes x 4 colors, train
# correlation 0.95, shifted test correlation 0.25, tiny_cnn, 3000 iterations, 3 seeds. Minutes per run on CPU.

import pytest

from clfa.common import names as N
from clfa.common.config import load_config
from clfa.data import SyntheticFactorSpec
from clfa.evaluation import run_synthetic_shift_study

pytestmark = pytest.mark.slow

SEEDS = [0, 1, 2]


def _study(tmp_path_factory, name, overrides=None):
    cfg = load_config(profile=N.SYNTHETIC, overrides=overrides, use_environment=False)
    spec = SyntheticFactorSpec(num_classes=4, image_size=32, train_correlation=0.95, test_correlation=0.25)
    runs = run_synthetic_shift_study(cfg, spec, SEEDS, str(tmp_path_factory.mktemp(name)))
    return runs.groupby("variant")


@pytest.fixture(scope="module")
def all_transforms(tmp_path_factory):
    return _study(tmp_path_factory, "all16")


@pytest.fixture(scope="module")
def five_transforms(tmp_path_factory):
    return _study(tmp_path_factory, "five", { "transforms.enabled": ["five"] })


def test_full_objective_generalizes_best(all_transforms):
    mean = all_transforms["shifted_acc"].mean()
    std = all_transforms["shifted_acc"].std(ddof=1)
    assert mean["full"] > mean["baseline_t"] > mean["baseline"]
    assert mean["full"] >= mean["baseline_t"] + 0.03
    assert mean["full"] - mean["baseline_t"] > max(std["full"], std["baseline_t"])
    assert mean["baseline_t"] - mean["baseline"] > max(std["baseline_t"], std["baseline"])


def test_noncausal_half_carries_no_label(all_transforms):
    probe_fb = all_transforms["probe_f_b"].mean()["full"]
    probe_fc = all_transforms["probe_f_c"].mean()["full"]
    assert abs(probe_fb - 0.25) <= 0.10
    assert probe_fc - probe_fb >= 0.20


def test_fewer_transforms_hurt_the_full_objective_less(all_transforms, five_transforms):
    before, after = all_transforms["shifted_acc"].mean(), five_transforms["shifted_acc"].mean()
    assert before["full"] - after["full"] < before["baseline_t"] - after["baseline_t"]
