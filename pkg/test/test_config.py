import os

import pytest

from clfa.common import names as N
from clfa.common.config import TrainConfig, load_config, set_dotted
from clfa.common.errors import ClfaError, ErrorType
from clfa.training import lr_at


def _write(tmp_path, text, name="run.toml"):
    path = os.path.join(tmp_path, name)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return path


class TestProfiles:

    def test_pacs(self):
        cfg = load_config(profile=N.PACS)
        assert cfg.weights.lambda_samples == 15
        assert cfg.triples_per_class == 4
        assert cfg.base_lr == pytest.approx(1e-4)
        assert cfg.max_iters == 40000
        assert cfg.model.num_classes == 7

    @pytest.mark.parametrize("profile", [N.DIGITS, N.CIFAR10])
    def test_digits_and_cifar10(self, profile):
        cfg = load_config(profile=profile)
        assert cfg.weights.lambda_samples == 25
        assert cfg.triples_per_class == 8
        assert cfg.base_lr == pytest.approx(1e-3)
        assert cfg.max_iters == 40000
        assert cfg.model.num_classes == 10

    @pytest.mark.parametrize("profile", [N.PACS, N.DIGITS, N.CIFAR10, N.SYNTHETIC])
    def test_shared_objective_defaults(self, profile):
        cfg = load_config(profile=profile)
        assert cfg.weights.delta == pytest.approx(2.0)
        assert (cfg.weights.alpha1, cfg.weights.alpha2, cfg.weights.alpha3) == (0.5, 0.5, 0.5)
        assert cfg.lr_halving_period == 10000
        assert cfg.profile == profile

    def test_schedule_on_pacs_profile(self):
        assert lr_at(10000, load_config(profile=N.PACS)) == pytest.approx(5e-5)

    def test_unknown_profile(self):
        with pytest.raises(ClfaError) as e:
            load_config(profile="imagenet")
        assert e.value.type == ErrorType.CONFIG


class TestLoading:

    def test_file_overrides_profile(self, tmp_path):
        path = _write(tmp_path, 'profile = "digits"\nmax_iters = 100\n[weights]\nalpha2 = 0.25\n')
        cfg = load_config(path)
        assert cfg.max_iters == 100
        assert cfg.weights.alpha2 == pytest.approx(0.25)
        assert cfg.weights.lambda_samples == 25

    def test_transform_range_table(self, tmp_path):
        path = _write(tmp_path, '[transforms]\nenabled = ["Rotate"]\n\n[transforms.Rotate]\nrange = [-10.0, 10.0]\n')
        cfg = load_config(path)
        assert cfg.transforms.ranges == { "Rotate": (-10.0, 10.0) }

    def test_dotted_overrides(self):
        cfg = load_config(profile=N.SYNTHETIC, overrides={ "weights.alpha1": 0.0, "model.z_dim": 8, "data.val_fraction": 0.2 })
        assert cfg.weights.alpha1 == 0.0
        assert cfg.model.z_dim == 8
        assert cfg.data.val_fraction == pytest.approx(0.2)

    def test_set_dotted_creates_tables(self):
        assert set_dotted(dict(), "a.b.c", 1) == { "a": { "b": { "c": 1 } } }

    def test_environment_seed(self, monkeypatch):
        monkeypatch.setenv("CLFA_SEED", "17")
        assert load_config(profile=N.SYNTHETIC).seed == 17
        assert load_config(profile=N.SYNTHETIC, use_environment=False).seed == 0

    def test_environment_seed_must_be_integer(self, monkeypatch):
        monkeypatch.setenv("CLFA_SEED", "seventeen")
        with pytest.raises(ClfaError) as e:
            load_config(profile=N.SYNTHETIC)
        assert e.value.type == ErrorType.CONFIG

    def test_missing_file(self, tmp_path):
        with pytest.raises(ClfaError) as e:
            load_config(os.path.join(tmp_path, "absent.toml"))
        assert e.value.type == ErrorType.CONFIG

    def test_malformed_file(self, tmp_path):
        with pytest.raises(ClfaError) as e:
            load_config(_write(tmp_path, "max_iters = = 3\n"))
        assert e.value.type == ErrorType.CONFIG


class TestValidation:

    def test_unknown_key(self):
        with pytest.raises(ClfaError) as e:
            load_config(overrides={ "weights.alpha4": 0.5 })
        assert e.value.type == ErrorType.CONFIG
        assert e.value.exit_code == 2
        assert e.value.one_line == f"CONFIG: {' '.join(e.value.message.split())}"

    @pytest.mark.parametrize("key,value", [
        ("weights.alpha1", -0.5),
        ("weights.delta", 0.0),
        ("weights.lambda_samples", 0),
        ("max_iters", 0),
        ("base_lr", -1e-3),
        ("data.val_fraction", 1.0),
        ("transforms.composition_depth", 0),
    ])
    def test_invalid_values(self, key, value):
        with pytest.raises(ClfaError) as e:
            load_config(overrides={ key: value })
        assert e.value.type == ErrorType.CONFIG

    def test_both_encoders_disabled(self):
        with pytest.raises(ClfaError) as e:
            TrainConfig(use_encoder_ag=False, use_encoder_ap=False)
        assert e.value.type == ErrorType.CONFIG

    def test_wrong_type(self):
        with pytest.raises(ClfaError) as e:
            load_config(overrides={ "max_iters": "many" })
        assert e.value.type == ErrorType.CONFIG

    def test_defaults_are_valid(self):
        cfg = TrainConfig()
        assert cfg.weights.pairing == N.SHUFFLED_K
        assert cfg.weights.lambda_samples == 5
