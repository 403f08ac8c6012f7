from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from clfa.common.errors import argument_error, data_error


@dataclass(frozen=True)
class LabeledSample:
    image: np.ndarray
    label: int
    sample_id: str


@dataclass(frozen=True)
class Triple:
    """(anchor, same-class positive, transformed anchor) with the strategies that produced the generated member."""

    anchor: LabeledSample
    positive: LabeledSample
    generated: LabeledSample
    label: int
    transforms: tuple[tuple[str, float], ...] = ()
    noise_seed: Optional[int] = None

    def __post_init__(self):
        if not (self.anchor.label == self.positive.label == self.generated.label == self.label):
            raise data_error(
                "Triple members must share one label.",
                labels = [self.anchor.label, self.positive.label, self.generated.label, self.label]
            )

    @property
    def provenance(self) -> dict:
        return {
            "anchor": self.anchor.sample_id,
            "positive": self.positive.sample_id,
            "label": int(self.label),
            "transforms": [[name, float(m)] for name, m in self.transforms],
            "noise_seed": self.noise_seed,
        }


@dataclass(frozen=True, eq=False)
class ImageDataset:
    """
    Immutable in-memory image dataset.

    images is N x H x W x C float32 in [0, 1]; arrays are made read-only so the object can be
    shared between workers. Domain tags are kept for export only: triples carry no domain field.
    """

    images: np.ndarray
    labels: np.ndarray
    sample_ids: tuple[str, ...]
    class_names: tuple[str, ...]
    domain_tags: tuple[str, ...] = ()
    attributes: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        n = len(self.labels)
        if self.images.ndim != 4 or self.images.shape[0] != n or len(self.sample_ids) != n:
            raise argument_error(
                "images, labels and sample_ids must have matching lengths and images must be N x H x W x C.",
                images = list(self.images.shape), labels = n, sample_ids = len(self.sample_ids)
            )
        if len(self.class_names) < 1:
            raise data_error("A dataset needs at least one class.")
        if n > 0 and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise data_error(f"Labels must lie in [0, {len(self.class_names)}).")
        if len(self.domain_tags) == 0:
            object.__setattr__(self, "domain_tags", tuple([self.name] * n))
        elif len(self.domain_tags) != n:
            raise argument_error("domain_tags must have one entry per sample.")
        for array in (self.images, self.labels, *self.attributes.values()):
            array.setflags(write=False)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    @cached_property
    def class_indices(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == k) for k in range(self.num_classes)]

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, index: int) -> LabeledSample:
        return LabeledSample(image=self.images[index], label=int(self.labels[index]), sample_id=self.sample_ids[index])

    def subset(self, indices: Sequence[int], name: Optional[str] = None) -> "ImageDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return ImageDataset(
            images = self.images[indices],
            labels = self.labels[indices],
            sample_ids = tuple(self.sample_ids[i] for i in indices),
            class_names = self.class_names,
            domain_tags = tuple(self.domain_tags[i] for i in indices),
            attributes = { k: v[indices] for k, v in self.attributes.items() },
            name = name if name is not None else self.name
        )


def concat_datasets(datasets: Sequence[ImageDataset], name: str = "union") -> ImageDataset:
    """Union of datasets sharing one class list. Domain tags are preserved per sample."""
    if len(datasets) == 0:
        raise argument_error("Nothing to concatenate.")
    class_names = datasets[0].class_names
    for ds in datasets[1:]:
        if ds.class_names != class_names:
            raise data_error(f"Class lists differ: {ds.name} has {list(ds.class_names)}, expected {list(class_names)}.")
    shared = set.intersection(*[set(ds.attributes.keys()) for ds in datasets])
    return ImageDataset(
        images = np.concatenate([ds.images for ds in datasets]),
        labels = np.concatenate([ds.labels for ds in datasets]),
        sample_ids = tuple(sid for ds in datasets for sid in ds.sample_ids),
        class_names = class_names,
        domain_tags = tuple(tag for ds in datasets for tag in ds.domain_tags),
        attributes = { k: np.concatenate([ds.attributes[k] for ds in datasets]) for k in sorted(shared) },
        name = name
    )


def holdout_split(ds: ImageDataset, val_fraction: float, rng: np.random.Generator) -> tuple[ImageDataset, ImageDataset]:
    """Per-class random hold-out: (train, val). Classes with a single sample stay in train."""
    if not 0.0 < val_fraction < 1.0:
        raise argument_error(f"val_fraction must lie in (0, 1), got {val_fraction}.")
    train_idx, val_idx = [], []
    for members in ds.class_indices:
        members = rng.permutation(members)
        n_val = max(1, int(round(len(members) * val_fraction))) if len(members) >= 2 else 0
        val_idx.extend(members[:n_val].tolist())
        train_idx.extend(members[n_val:].tolist())
    return ds.subset(sorted(train_idx), name=f"{ds.name}_train"), ds.subset(sorted(val_idx), name=f"{ds.name}_val")
