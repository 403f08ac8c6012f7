"""Folder-layout datasets: root/<class_name>/<image files>, optionally under root/<split>/."""

import os
import hashlib
import logging
from typing import Optional, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from clfa.common import names as N
from clfa.common.errors import argument_error, io_error
from clfa.common.logger import fmsg
from clfa.common.utils import justext, juststem, normpath
from clfa.data.schema import ImageDataset, concat_datasets

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = ("png", "jpg", "jpeg", "bmp", "gif", "tif", "tiff", "webp")

CIFAR10_CLASSES = ("airplane", "automobile", "bird", "cat", "deer", "dog", "frog", "horse", "ship", "truck")

CIFAR10C_CORRUPTIONS = (
    "brightness", "contrast", "defocus_blur", "elastic_transform", "fog", "frost", "gaussian_blur",
    "gaussian_noise", "glass_blur", "impulse_noise", "jpeg_compression", "motion_blur", "pixelate",
    "saturate", "shot_noise", "snow", "spatter", "speckle_noise", "zoom_blur",
)
_CIFAR10C_LEVEL_SIZE = 10000


def decode_image(path: str, image_size: int) -> np.ndarray:
    """Read an image file as RGB, resize it bilinearly to a square and scale to [0, 1]."""
    try:
        with Image.open(path) as im:
            im = im.convert("RGB").resize((image_size, image_size), Image.BILINEAR)
            return np.asarray(im, dtype=np.float32) / 255.0
    except (OSError, UnidentifiedImageError, ValueError) as e:
        raise io_error(f"Unreadable image {path}: {e}", path=path)


def _holdout_rank(sample_id: str) -> str:
    return hashlib.md5(sample_id.encode("utf-8")).hexdigest()


def _select_split(files: list[str], class_name: str, split: str, val_fraction: float) -> list[str]:
    if split not in (N.SPLIT_TRAIN, N.SPLIT_VAL) or len(files) < 2:
        return files if split != N.SPLIT_VAL else []
    n_val = max(1, int(round(len(files) * val_fraction)))
    ranked = sorted(files, key=lambda f: _holdout_rank(f"{class_name}/{f}"))
    val = set(ranked[:n_val])
    return [f for f in files if (f in val) == (split == N.SPLIT_VAL)]


def _resolve_split_folder(root: str, split: str) -> tuple[str, bool]:
    """Return (folder holding the class directories, whether a train/val hold-out applies)."""
    has = lambda s: os.path.isdir(os.path.join(root, s))
    if split == N.SPLIT_TRAIN and has(N.SPLIT_TRAIN):
        return os.path.join(root, N.SPLIT_TRAIN), not has(N.SPLIT_VAL)
    if split == N.SPLIT_VAL and has(N.SPLIT_VAL):
        return os.path.join(root, N.SPLIT_VAL), False
    if split == N.SPLIT_VAL and has(N.SPLIT_TRAIN):
        return os.path.join(root, N.SPLIT_TRAIN), True
    if split == N.SPLIT_TEST and has(N.SPLIT_TEST):
        return os.path.join(root, N.SPLIT_TEST), False
    return root, split in (N.SPLIT_TRAIN, N.SPLIT_VAL)


def load_folder_dataset(
    root: str,
    split: str = N.SPLIT_ALL,
    image_size: int = 32,
    val_fraction: float = 0.1,
    domain_tag: Optional[str] = None
) -> ImageDataset:
    """
    Load root/<class_name>/<image files>.

    Class indices follow sorted class-name order. When root/<split>/ exists it is used; otherwise
    train/val are a deterministic per-class hold-out (ranked by a hash of the sample id) and test/all
    return every image.

    Raises:
        ClfaError: IO error naming the missing root, the empty class folder or the unreadable image.
    """
    if split not in N.SPLITS:
        raise argument_error(f"Unknown split '{split}', expected one of {list(N.SPLITS)}.")
    root = normpath(root)
    if not os.path.isdir(root):
        raise io_error(f"Dataset root does not exist: {root}", path=root)
    base, holdout = _resolve_split_folder(root, split)

    class_names = sorted(d for d in os.listdir(base) if os.path.isdir(os.path.join(base, d)) and d not in N.SPLITS)
    if len(class_names) == 0:
        raise io_error(f"No class folders found in {base}", path=base)

    images, labels, sample_ids = [], [], []
    for label, class_name in enumerate(class_names):
        class_dir = os.path.join(base, class_name)
        files = sorted(f for f in os.listdir(class_dir) if justext(f).lower() in IMAGE_EXTENSIONS)
        if len(files) == 0:
            raise io_error(f"Empty class folder: {normpath(class_dir)}", path=normpath(class_dir))
        if holdout:
            files = _select_split(files, class_name, split, val_fraction)
        for f in files:
            images.append(decode_image(os.path.join(class_dir, f), image_size))
            labels.append(label)
            sample_ids.append(f"{class_name}/{f}")

    if len(images) == 0:
        raise io_error(f"No images selected for split '{split}' in {root}", path=root)
    tag = domain_tag if domain_tag is not None else juststem(root)
    logger.info(fmsg("Loaded folder dataset", root=root, split=split, samples=len(images), classes=len(class_names)))
    return ImageDataset(
        images = np.stack(images).astype(np.float32),
        labels = np.asarray(labels, dtype=np.int64),
        sample_ids = tuple(sample_ids),
        class_names = tuple(class_names),
        domain_tags = tuple([tag] * len(images)),
        name = tag
    )


def load_domains(root: str, split: str = N.SPLIT_ALL, image_size: int = 32, val_fraction: float = 0.1) -> dict[str, ImageDataset]:
    """Load root/<domain>/<class>/<images> as {domain: dataset}, sorted by domain name."""
    root = normpath(root)
    if not os.path.isdir(root):
        raise io_error(f"Dataset root does not exist: {root}", path=root)
    domains = sorted(d for d in os.listdir(root) if os.path.isdir(os.path.join(root, d)))
    if len(domains) == 0:
        raise io_error(f"No domain folders found in {root}", path=root)
    return {
        domain: load_folder_dataset(os.path.join(root, domain), split=split, image_size=image_size,
                                    val_fraction=val_fraction, domain_tag=domain)
        for domain in domains
    }


def load_corruption_levels(
    root: str,
    corruptions: Optional[Sequence[str]] = None,
    max_per_level: Optional[int] = None
) -> dict[str, ImageDataset]:
    """
    Read the CIFAR10-C release layout (<corruption>.npy + labels.npy) as one dataset per severity level.

    Corruption types are pooled within a level: level k holds rows [(k-1)*10000, k*10000) of every
    selected corruption file.
    """
    root = normpath(root)
    labels_path = os.path.join(root, "labels.npy")
    if not os.path.exists(labels_path):
        raise io_error(f"Missing labels.npy in {root}", path=labels_path)
    all_labels = np.load(labels_path).astype(np.int64)
    corruptions = list(corruptions) if corruptions else [c for c in CIFAR10C_CORRUPTIONS if os.path.exists(os.path.join(root, f"{c}.npy"))]
    if len(corruptions) == 0:
        raise io_error(f"No corruption files found in {root}", path=root)

    levels = dict()
    for level in range(1, 6):
        parts = []
        lo, hi = (level - 1) * _CIFAR10C_LEVEL_SIZE, level * _CIFAR10C_LEVEL_SIZE
        for corruption in corruptions:
            path = os.path.join(root, f"{corruption}.npy")
            if not os.path.exists(path):
                raise io_error(f"Missing corruption file {path}", path=path)
            rows = np.load(path, mmap_mode="r")[lo:hi]
            if max_per_level is not None:
                rows = rows[: max(1, max_per_level // len(corruptions))]
            parts.append(ImageDataset(
                images = np.asarray(rows, dtype=np.float32) / 255.0,
                labels = all_labels[lo:lo + len(rows)],
                sample_ids = tuple(f"{corruption}/{level}/{i}" for i in range(len(rows))),
                class_names = CIFAR10_CLASSES,
                domain_tags = tuple([f"{corruption}_level{level}"] * len(rows)),
                name = f"level{level}"
            ))
        levels[f"level{level}"] = concat_datasets(parts, name=f"level{level}")
    return levels


def write_folder_dataset(ds: ImageDataset, out: str) -> str:
    """Write ds as out/<class_name>/<id>.png (8-bit)."""
    out = normpath(out)
    try:
        for class_name in ds.class_names:
            os.makedirs(os.path.join(out, class_name), exist_ok=True)
        for i in range(len(ds)):
            sample = ds[i]
            pixels = (np.clip(sample.image, 0.0, 1.0) * 255.0).round().astype(np.uint8)
            fname = juststem(sample.sample_id.replace("/", "_")) + ".png"
            Image.fromarray(pixels).save(os.path.join(out, ds.class_names[sample.label], fname))
    except OSError as e:
        raise io_error(f"Cannot write dataset to {out}: {e}", path=out)
    return out
