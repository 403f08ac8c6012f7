import os

import numpy as np
import pytest

from clfa.common import names as N
from clfa.common.errors import ClfaError, ErrorType
from clfa.common.utils import make_rng
from clfa.data import (
    ImageDataset,
    SyntheticFactorSpec,
    concat_datasets,
    empirical_mutual_information,
    generate_synthetic,
    holdout_split,
    load_domains,
    load_folder_dataset,
    replay_generated,
    sample_triple_batch,
    write_folder_dataset,
)
from clfa.transforms import TransformBank


class TestTripleSampling:

    def test_batch_layout(self, train_ds):
        batch = sample_triple_batch(train_ds, 4, make_rng(0), TransformBank(), N.SYNTHETIC)
        assert len(batch) == 4 * train_ds.num_classes
        assert [t.label for t in batch] == sorted(t.label for t in batch)
        for t in batch:
            assert t.anchor.label == t.positive.label == t.generated.label == t.label
            assert t.positive.sample_id != t.anchor.sample_id
            assert len(t.transforms) == 1

    def test_recorded_magnitudes_within_range(self, train_ds):
        tb = TransformBank()
        for t in sample_triple_batch(train_ds, 8, make_rng(1), tb, N.SYNTHETIC):
            for name, magnitude in t.transforms:
                assert tb.spec(name).contains(magnitude)

    def test_generated_image_replays_from_provenance(self, train_ds):
        tb = TransformBank(enabled=[N.NOISE_GAUSSIAN, N.NOISE_SALT, N.ROTATE])
        for t in sample_triple_batch(train_ds, 3, make_rng(2), tb, N.SYNTHETIC):
            np.testing.assert_array_equal(replay_generated(t, tb), t.generated.image)

    def test_same_seed_same_batch(self, train_ds):
        tb = TransformBank()
        a = sample_triple_batch(train_ds, 2, make_rng(5), tb, N.SYNTHETIC)
        b = sample_triple_batch(train_ds, 2, make_rng(5), tb, N.SYNTHETIC)
        assert [t.provenance for t in a] == [t.provenance for t in b]
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.generated.image, y.generated.image)

    def test_without_transforms_generated_is_anchor(self, train_ds):
        for t in sample_triple_batch(train_ds, 2, make_rng(0), TransformBank(), N.SYNTHETIC, use_transforms=False):
            assert t.transforms == ()
            np.testing.assert_array_equal(t.generated.image, t.anchor.image)

    def test_small_class_samples_with_replacement(self, train_ds):
        small = train_ds.subset([int(idx[0]) for idx in train_ds.class_indices])
        batch = sample_triple_batch(small, 3, make_rng(0), TransformBank(), N.SYNTHETIC)
        assert len(batch) == 3 * small.num_classes
        assert all(t.positive.sample_id == t.anchor.sample_id for t in batch)

    def test_zero_triples_is_argument_error(self, train_ds):
        with pytest.raises(ClfaError) as e:
            sample_triple_batch(train_ds, 0, make_rng(0), TransformBank(), N.SYNTHETIC)
        assert e.value.type == ErrorType.ARGUMENT

    def test_empty_class_is_data_error(self, train_ds):
        without_last = train_ds.subset(np.flatnonzero(train_ds.labels != train_ds.num_classes - 1))
        with pytest.raises(ClfaError) as e:
            sample_triple_batch(without_last, 1, make_rng(0), TransformBank(), N.SYNTHETIC)
        assert e.value.type == ErrorType.DATA


class TestSyntheticDataset:

    def test_splits(self, synthetic_splits, synthetic_spec):
        train, val, test = synthetic_splits["train"], synthetic_splits["val"], synthetic_splits["test"]
        assert len(train) == synthetic_spec.n_train_per_class * 3
        assert len(test) == synthetic_spec.n_test_per_class * 3
        assert len(val) == 2 * 3
        assert train.image_shape == (16, 16, 3)
        assert train.images.min() >= 0.0 and train.images.max() <= 1.0

    def test_deterministic_generation(self):
        spec = SyntheticFactorSpec(num_classes=4, image_size=16, seed=3)
        a = generate_synthetic(spec, 10, make_rng(3))
        b = generate_synthetic(spec, 10, make_rng(3))
        np.testing.assert_array_equal(a.images, b.images)
        np.testing.assert_array_equal(a.attributes["color"], b.attributes["color"])

    def test_training_split_is_correlated(self):
        spec = SyntheticFactorSpec(num_classes=4, image_size=16, train_correlation=0.95)
        ds = generate_synthetic(spec, 500, make_rng(0), split=N.SPLIT_TRAIN)
        assert abs(float((ds.attributes["color"] == ds.labels).mean()) - 0.95) < 0.03

    def test_chance_correlation_carries_no_information(self):
        spec = SyntheticFactorSpec(num_classes=4, image_size=16)
        ds = generate_synthetic(spec, 2500, make_rng(0), split=N.SPLIT_TEST, correlation=0.25)
        assert empirical_mutual_information(ds.attributes["color"], ds.labels) < 0.01
        assert empirical_mutual_information(ds.attributes["texture"], ds.labels) < 0.01

    def test_shape_is_the_label(self, train_ds):
        np.testing.assert_array_equal(train_ds.attributes["shape"], train_ds.labels)

    def test_invalid_spec(self):
        with pytest.raises(ClfaError) as e:
            SyntheticFactorSpec(num_classes=4, train_correlation=1.5)
        assert e.value.type == ErrorType.CONFIG


class TestFolderDatasets:

    def test_load_written_dataset(self, folder_dataset, train_ds):
        ds = load_folder_dataset(folder_dataset, image_size=16)
        assert len(ds) == len(train_ds)
        assert ds.class_names == train_ds.class_names
        assert ds.image_shape == (16, 16, 3)

    def test_written_labels_survive_reload(self, tmp_path, synthetic_spec):
        test_ds = generate_synthetic(synthetic_spec, 5, make_rng(4), N.SPLIT_TEST)
        assert test_ds.class_names == tuple(sorted(test_ds.class_names))
        loaded = load_folder_dataset(write_folder_dataset(test_ds, os.path.join(tmp_path, "test")), image_size=16)
        assert loaded.class_names == test_ds.class_names
        original = { sid: i for i, sid in enumerate(test_ds.sample_ids) }
        for j, sid in enumerate(loaded.sample_ids):
            i = original[os.path.splitext(sid.split("/")[1])[0]]
            assert loaded.labels[j] == test_ds.labels[i]
            np.testing.assert_allclose(loaded.images[j], test_ds.images[i], atol=1.0 / 255.0 + 1e-6)

    def test_class_order_ignores_shape_list_order(self):
        spec = SyntheticFactorSpec(num_classes=3, shapes=["triangle", "square", "circle"], image_size=16)
        ds = generate_synthetic(spec, 2, make_rng(0))
        assert ds.class_names == ("circle", "square", "triangle")
        assert [sid.split("_")[1] for sid in ds.sample_ids] == ["circle"] * 2 + ["square"] * 2 + ["triangle"] * 2

    def test_train_val_holdout_is_disjoint(self, folder_dataset):
        train = load_folder_dataset(folder_dataset, N.SPLIT_TRAIN, 16, val_fraction=0.2)
        val = load_folder_dataset(folder_dataset, N.SPLIT_VAL, 16, val_fraction=0.2)
        assert set(train.sample_ids).isdisjoint(val.sample_ids)
        assert len(train) + len(val) == 60
        assert np.bincount(val.labels).tolist() == [4, 4, 4]

    def test_missing_root_is_io_error(self, tmp_path):
        with pytest.raises(ClfaError) as e:
            load_folder_dataset(os.path.join(tmp_path, "nowhere"))
        assert e.value.type == ErrorType.IO

    def test_unreadable_image_is_io_error(self, tmp_path):
        os.makedirs(os.path.join(tmp_path, "cat"))
        with open(os.path.join(tmp_path, "cat", "broken.png"), "w") as f:
            f.write("not an image")
        with pytest.raises(ClfaError) as e:
            load_folder_dataset(str(tmp_path), image_size=16)
        assert e.value.type == ErrorType.IO

    def test_domains_share_classes(self, tmp_path, synthetic_splits):
        for domain in ("photo", "sketch"):
            write_folder_dataset(synthetic_splits["test"], os.path.join(tmp_path, domain))
        domains = load_domains(str(tmp_path), image_size=16)
        assert list(domains) == ["photo", "sketch"]
        union = concat_datasets(list(domains.values()))
        assert len(union) == 2 * len(synthetic_splits["test"])
        assert set(union.domain_tags) == {"photo", "sketch"}


class TestDatasetSchema:

    def test_holdout_split_per_class(self, train_ds):
        train, val = holdout_split(train_ds, 0.1, make_rng(0))
        assert np.bincount(val.labels).tolist() == [2, 2, 2]
        assert len(train) + len(val) == len(train_ds)

    def test_images_are_read_only(self, train_ds):
        with pytest.raises(ValueError):
            train_ds.images[0, 0, 0, 0] = 0.5

    def test_label_out_of_range(self):
        with pytest.raises(ClfaError) as e:
            ImageDataset(
                images = np.zeros((1, 4, 4, 3), dtype=np.float32),
                labels = np.array([2]),
                sample_ids = ("a",),
                class_names = ("x", "y")
            )
        assert e.value.type == ErrorType.DATA

    def test_concat_rejects_different_classes(self, train_ds):
        other = ImageDataset(
            images = np.zeros((1, 16, 16, 3), dtype=np.float32),
            labels = np.array([0]),
            sample_ids = ("z",),
            class_names = ("only",)
        )
        with pytest.raises(ClfaError) as e:
            concat_datasets([train_ds, other])
        assert e.value.type == ErrorType.DATA
