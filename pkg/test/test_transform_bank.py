import numpy as np
import pytest

from clfa.common import names as N
from clfa.common.config import TransformsConfig
from clfa.common.errors import ClfaError, ErrorType
from clfa.common.utils import make_rng
from clfa.transforms import (
    MAGNITUDE_TABLE,
    PRESETS,
    STRATEGY_NAMES,
    TransformBank,
    apply_transform,
    compose,
    default_spec,
    resolve_names,
)


class TestStrategyTable:

    def test_sixteen_strategies(self):
        assert len(STRATEGY_NAMES) == 16
        assert len(TransformBank()) == 16

    @pytest.mark.parametrize("preset,size", [("all16", 16), ("ten", 10), ("five", 5), ("digits14", 14), ("digits8", 8), ("digits4", 4)])
    def test_preset_sizes(self, preset, size):
        assert len(resolve_names([preset])) == size
        assert len(PRESETS[preset]) == size

    def test_five_preset_members(self):
        assert set(resolve_names(["five"])) == {N.BRIGHTNESS, N.CONTRAST, N.COLOR, N.SHARPNESS, N.ROTATE}

    def test_unknown_strategy_is_config_error(self):
        with pytest.raises(ClfaError) as e:
            resolve_names(["Brightness", "Blur"])
        assert e.value.type == ErrorType.CONFIG

    def test_digits_subset_excludes_rotate_and_flip(self):
        names = {spec.name for spec in TransformBank().safe_subset(N.DIGITS)}
        assert N.ROTATE not in names and N.FLIP not in names
        assert len(names) == 14

    def test_pacs_subset_is_complete(self):
        assert len(TransformBank().safe_subset(N.PACS)) == 16

    def test_range_override_from_config(self):
        cfg = TransformsConfig.model_validate({ "enabled": ["Rotate"], "Rotate": { "range": [-10.0, 10.0] } })
        tb = TransformBank.from_config(cfg)
        assert tb.spec(N.ROTATE).magnitude_range == (-10.0, 10.0)

    def test_empty_range_rejected(self):
        with pytest.raises(ClfaError) as e:
            TransformsConfig.model_validate({ "Rotate": { "range": [10.0, -10.0] } })
        assert e.value.type == ErrorType.CONFIG


class TestApplyTransform:

    @pytest.mark.parametrize("name", STRATEGY_NAMES)
    def test_output_contract(self, name, random_image):
        spec = default_spec(name)
        lo, hi = spec.magnitude_range
        before = random_image.copy()
        out = apply_transform(random_image, spec, (lo + hi) / 2.0, rng=make_rng(0))
        assert out.shape == random_image.shape
        assert out.dtype == np.float32
        assert out.min() >= 0.0 and out.max() <= 1.0
        np.testing.assert_array_equal(random_image, before)

    def test_magnitude_outside_range(self, random_image):
        with pytest.raises(ClfaError) as e:
            apply_transform(random_image, default_spec(N.ROTATE), 45.0)
        assert e.value.type == ErrorType.ARGUMENT

    def test_noise_needs_random_source(self, random_image):
        with pytest.raises(ClfaError) as e:
            apply_transform(random_image, default_spec(N.NOISE_GAUSSIAN), 0.05)
        assert e.value.type == ErrorType.ARGUMENT

    def test_noise_is_reproducible(self, random_image):
        spec = default_spec(N.NOISE_SALT)
        a = apply_transform(random_image, spec, 0.05, rng=make_rng(3))
        b = apply_transform(random_image, spec, 0.05, rng=make_rng(3))
        np.testing.assert_array_equal(a, b)

    def test_unit_brightness_is_identity(self, random_image):
        out = apply_transform(random_image, default_spec(N.BRIGHTNESS), 1.0)
        np.testing.assert_allclose(out, random_image, atol=1e-6)

    def test_double_invert_is_identity(self, random_image):
        spec = default_spec(N.INVERT)
        out = compose(random_image, [(spec, 0.0), (spec, 0.0)])
        np.testing.assert_allclose(out, random_image, atol=1e-6)

    def test_double_flip_is_identity(self, random_image):
        spec = default_spec(N.FLIP)
        out = compose(random_image, [(spec, 0.0), (spec, 0.0)])
        np.testing.assert_array_equal(out, random_image)

    def test_empty_composition_copies(self, random_image):
        out = compose(random_image, [])
        np.testing.assert_array_equal(out, random_image)
        assert out is not random_image

    def test_zero_rotation_is_identity(self, random_image):
        out = apply_transform(random_image, default_spec(N.ROTATE), 0.0)
        np.testing.assert_array_equal(out, random_image)

    def test_brightness_two_saturates_mid_grey(self):
        img = np.full((8, 8, 3), 0.5, dtype=np.float32)
        out = apply_transform(img, default_spec(N.BRIGHTNESS), 2.0)
        np.testing.assert_allclose(out, np.ones_like(img), atol=1e-6)

    def test_solarize_at_top_threshold_is_identity(self):
        img = np.array([[[0.2, 1.0, 0.0], [1.0, 0.5, 1.0]],
                        [[0.5, 1.0, 0.3], [0.0, 1.0, 0.9]]], dtype=np.float32)
        out = compose(img, [(default_spec(N.SOLARIZE), 1.0)])
        np.testing.assert_array_equal(out, img)

    def test_solarize_inverts_above_threshold(self):
        img = np.array([[[0.2, 0.6, 1.0]]], dtype=np.float32)
        out = apply_transform(img, default_spec(N.SOLARIZE), 0.5)
        np.testing.assert_allclose(out, [[[0.2, 0.4, 0.0]]], atol=1e-6)

    def test_identity_factors_compose_to_identity(self, random_image):
        chain = [(default_spec(N.ROTATE), 0.0), (default_spec(N.BRIGHTNESS), 1.0)]
        np.testing.assert_allclose(compose(random_image, chain), random_image, atol=1e-6)

    def test_out_of_range_pixels_rejected(self):
        with pytest.raises(ClfaError) as e:
            apply_transform(np.full((4, 4, 3), 2.0, dtype=np.float32), default_spec(N.BRIGHTNESS), 1.0)
        assert e.value.type == ErrorType.ARGUMENT


class TestSampling:

    def test_magnitudes_within_range(self):
        tb, rng = TransformBank(), make_rng(0)
        for _ in range(200):
            spec, magnitude = tb.sample_strategy(rng, N.PACS)
            assert spec.contains(magnitude)

    def test_digits_never_draws_unsafe(self):
        tb, rng = TransformBank(), make_rng(0)
        drawn = {tb.sample_strategy(rng, N.DIGITS)[0].name for _ in range(500)}
        assert N.ROTATE not in drawn and N.FLIP not in drawn

    def test_same_seed_same_draws(self):
        tb = TransformBank()
        a = tb.sample_chain(make_rng(7), N.PACS)
        b = tb.sample_chain(make_rng(7), N.PACS)
        assert [(s.name, m) for s, m in a] == [(s.name, m) for s, m in b]

    def test_no_safe_strategy_is_config_error(self):
        tb = TransformBank(enabled=[N.ROTATE, N.FLIP])
        with pytest.raises(ClfaError) as e:
            tb.sample_strategy(make_rng(0), N.DIGITS)
        assert e.value.type == ErrorType.CONFIG

    def test_composition_depth(self):
        tb = TransformBank(composition_depth=3)
        assert len(tb.sample_chain(make_rng(0), N.SYNTHETIC)) == 3

    def test_every_strategy_has_a_table_entry(self):
        for name in STRATEGY_NAMES:
            kind, (lo, hi), op = MAGNITUDE_TABLE[name]
            assert kind in (N.PHOTOMETRIC, N.GEOMETRIC) and lo <= hi and callable(op)

    def test_uniform_strategy_frequencies(self):
        tb, rng = TransformBank(), make_rng(0)
        draws = 10000
        counts = dict.fromkeys(STRATEGY_NAMES, 0)
        for _ in range(draws):
            counts[tb.sample_strategy(rng, N.PACS)[0].name] += 1
        for name, count in counts.items():
            assert abs(count / draws - 1.0 / 16.0) <= 0.01, (name, count)
