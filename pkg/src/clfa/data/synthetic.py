"""Controllable-factor dataset: the label is the shape, color and background texture are spurious.

Each class k owns a shape, a linked color k and a linked texture k. A class-k image uses its linked
color with probability ``correlation`` and one of the other colors uniformly otherwise; the texture is
drawn the same way, independently of the color. With correlation = 1 / num_classes neither factor
carries information about the label.
"""

import logging
from typing import Optional

import numpy as np
from PIL import Image, ImageDraw
from pydantic import Field, ValidationError

from clfa.common import names as N
from clfa.common.config import ValidatedModel, read_toml
from clfa.common.errors import config_error
from clfa.common.logger import fmsg
from clfa.common.utils import make_rng
from clfa.data.schema import ImageDataset

logger = logging.getLogger(__name__)


SHAPES = ("square", "circle", "triangle", "cross", "diamond", "ring")

COLORS = {
    "red":     (0.90, 0.15, 0.15),
    "green":   (0.15, 0.80, 0.20),
    "blue":    (0.20, 0.30, 0.95),
    "yellow":  (0.95, 0.85, 0.10),
    "magenta": (0.85, 0.20, 0.85),
    "cyan":    (0.15, 0.85, 0.90),
}

TEXTURES = ("plain", "hstripes", "vstripes", "checker", "diagonal", "dots")

_BACKGROUND_LEVEL = 0.2
_TEXTURE_AMPLITUDE = 0.15



class SyntheticFactorSpec(ValidatedModel):

    num_classes: int = Field(
        title = "Number of classes",
        description = "One shape per class; class indices follow the sorted shape names.",
        examples = [4, 6],
        default = 4
    )
    shapes: Optional[list[str]] = Field(
        title = "Shapes",
        description = "Causal factor per class. None takes the first num_classes built-in shapes.",
        examples = [None, ["square", "circle", "triangle", "cross"]],
        default = None
    )
    colors: Optional[list[str]] = Field(
        title = "Color palette",
        description = "Non-causal color linked to each class. None takes the first num_classes built-in colors.",
        examples = [None, ["red", "green", "blue", "yellow"]],
        default = None
    )
    train_correlation: float = Field(
        title = "Training correlation",
        description = "Probability that a training image carries its class-linked color and texture.",
        examples = [0.95, 1.0],
        default = 0.95
    )
    test_correlation: float = Field(
        title = "Test correlation",
        description = "Same probability for the shifted test split.",
        examples = [0.25, 0.0],
        default = 0.25
    )
    image_size: int = Field(title = "Image size", examples = [32], default = 32)
    n_train_per_class: int = Field(title = "Training images per class", default = 500)
    n_test_per_class: int = Field(title = "Test images per class", default = 250)
    seed: int = Field(title = "Seed", default = 0)

    def _set_validation_rules(self) -> dict:
        return {
            "num_classes": [
                lambda **kw: "num_classes must be >= 2." if kw["num_classes"] < 2 else None,
                lambda **kw: f"num_classes must be <= {len(SHAPES)}." if kw["num_classes"] > len(SHAPES) else None,
            ],
            "shapes": [
                lambda **kw: f"Unknown shapes: {[s for s in kw['shapes'] if s not in SHAPES]}."
                    if kw["shapes"] is not None and any(s not in SHAPES for s in kw["shapes"]) else None,
                lambda **kw: "shapes must list num_classes distinct shapes."
                    if kw["shapes"] is not None and len(set(kw["shapes"])) != kw["num_classes"] else None,
            ],
            "colors": [
                lambda **kw: f"Unknown colors: {[c for c in kw['colors'] if c not in COLORS]}."
                    if kw["colors"] is not None and any(c not in COLORS for c in kw["colors"]) else None,
                lambda **kw: "colors must list num_classes distinct colors."
                    if kw["colors"] is not None and len(set(kw["colors"])) != kw["num_classes"] else None,
            ],
            "train_correlation": [
                lambda **kw: "train_correlation must lie in [0, 1]." if not 0.0 <= kw["train_correlation"] <= 1.0 else None
            ],
            "test_correlation": [
                lambda **kw: "test_correlation must lie in [0, 1]." if not 0.0 <= kw["test_correlation"] <= 1.0 else None
            ],
            "image_size": [lambda **kw: "image_size must be >= 16." if kw["image_size"] < 16 else None],
            "n_train_per_class": [lambda **kw: "n_train_per_class must be >= 1." if kw["n_train_per_class"] < 1 else None],
            "n_test_per_class": [lambda **kw: "n_test_per_class must be >= 1." if kw["n_test_per_class"] < 1 else None],
        }

    # DOC: class k is the k-th shape in sorted name order, the same indexing load_folder_dataset uses
    @property
    def class_shapes(self) -> tuple[str, ...]:
        return tuple(sorted(self.shapes if self.shapes is not None else SHAPES[:self.num_classes]))

    @property
    def class_colors(self) -> tuple[str, ...]:
        return tuple(self.colors) if self.colors is not None else tuple(COLORS.keys())[:self.num_classes]

    @property
    def class_textures(self) -> tuple[str, ...]:
        return TEXTURES[:self.num_classes]


def load_synthetic_spec(path: Optional[str] = None, **overrides) -> SyntheticFactorSpec:
    """Read a SyntheticFactorSpec from a TOML file (or the defaults), keyword overrides applied last."""
    data = read_toml(path) if path is not None else dict()
    data.update({ k: v for k, v in overrides.items() if v is not None })
    try:
        return SyntheticFactorSpec.model_validate(data)
    except ValidationError as e:
        fields = [".".join(str(p) for p in err["loc"]) for err in e.errors()]
        raise config_error(f"Invalid synthetic spec keys: {fields}.", errors=[err["msg"] for err in e.errors()])



# REGION: [Rendering]

def _texture(name: str, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    period = max(4, size // 8)
    if name == "hstripes":
        pattern = (yy // (period // 2)) % 2
    elif name == "vstripes":
        pattern = (xx // (period // 2)) % 2
    elif name == "checker":
        pattern = ((yy // period) + (xx // period)) % 2
    elif name == "diagonal":
        pattern = ((yy + xx) // (period // 2)) % 2
    elif name == "dots":
        pattern = ((yy % period) < 2) & ((xx % period) < 2)
    else:
        pattern = np.zeros((size, size))
    return _BACKGROUND_LEVEL + _TEXTURE_AMPLITUDE * pattern.astype(np.float32)


def _shape_mask(shape: str, size: int, cx: float, cy: float, r: float) -> np.ndarray:
    canvas = Image.new("L", (size, size), 0)
    draw = ImageDraw.Draw(canvas)
    box = [cx - r, cy - r, cx + r, cy + r]
    if shape == "square":
        draw.rectangle(box, fill=255)
    elif shape == "circle":
        draw.ellipse(box, fill=255)
    elif shape == "triangle":
        draw.polygon([(cx, cy - r), (cx + r, cy + r), (cx - r, cy + r)], fill=255)
    elif shape == "cross":
        w = r / 3.0
        draw.rectangle([cx - w, cy - r, cx + w, cy + r], fill=255)
        draw.rectangle([cx - r, cy - w, cx + r, cy + w], fill=255)
    elif shape == "diamond":
        draw.polygon([(cx, cy - r), (cx + r, cy), (cx, cy + r), (cx - r, cy)], fill=255)
    elif shape == "ring":
        draw.ellipse(box, fill=255)
        inner = r * 0.5
        draw.ellipse([cx - inner, cy - inner, cx + inner, cy + inner], fill=0)
    return np.asarray(canvas, dtype=np.float32) / 255.0


def render_image(shape: str, color: str, texture: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """Render one H x W x 3 image: a colored shape with jittered position and scale over a textured background."""
    r = size * rng.uniform(0.25, 0.35)
    cx = size / 2.0 + rng.uniform(-0.1, 0.1) * size
    cy = size / 2.0 + rng.uniform(-0.1, 0.1) * size
    mask = _shape_mask(shape, size, cx, cy, r)[..., None]
    background = np.repeat(_texture(texture, size)[..., None], 3, axis=2)
    foreground = np.asarray(COLORS[color], dtype=np.float32)[None, None, :]
    return np.clip(background * (1.0 - mask) + foreground * mask, 0.0, 1.0).astype(np.float32)

# ENDREGION: [Rendering]



def _linked_factor(rng: np.random.Generator, label: int, num_values: int, correlation: float) -> int:
    # DOC: the class-linked value with probability correlation, else uniform over the others
    if rng.random() < correlation:
        return label
    other = int(rng.integers(num_values - 1))
    return other if other < label else other + 1


def generate_synthetic(
    spec: SyntheticFactorSpec,
    n_per_class: int,
    rng: np.random.Generator,
    split: str = N.SPLIT_TRAIN,
    correlation: Optional[float] = None
) -> ImageDataset:
    """
    Render n_per_class images per class.

    The train split uses spec.train_correlation, every other split spec.test_correlation unless
    correlation is given. The dataset attributes hold the per-sample shape, color and texture indices.
    """
    if correlation is None:
        correlation = spec.train_correlation if split == N.SPLIT_TRAIN else spec.test_correlation
    shapes, colors, textures = spec.class_shapes, spec.class_colors, spec.class_textures
    k = spec.num_classes

    images, labels, sample_ids, color_ids, texture_ids = [], [], [], [], []
    for label in range(k):
        for i in range(n_per_class):
            color = _linked_factor(rng, label, k, correlation)
            texture = _linked_factor(rng, label, k, correlation)
            images.append(render_image(shapes[label], colors[color], textures[texture], spec.image_size, rng))
            labels.append(label)
            sample_ids.append(f"{split}_{shapes[label]}_{i:05d}")
            color_ids.append(color)
            texture_ids.append(texture)

    labels = np.asarray(labels, dtype=np.int64)
    logger.debug(fmsg("Generated synthetic split", split=split, samples=len(labels), correlation=correlation))
    return ImageDataset(
        images = np.stack(images),
        labels = labels,
        sample_ids = tuple(sample_ids),
        class_names = shapes,
        attributes = {
            "shape": labels.copy(),
            "color": np.asarray(color_ids, dtype=np.int64),
            "texture": np.asarray(texture_ids, dtype=np.int64),
        },
        name = f"{N.SYNTHETIC}_{split}"
    )


def make_synthetic_splits(spec: SyntheticFactorSpec) -> dict[str, ImageDataset]:
    """Train, validation (same correlation as train) and shifted test splits, each from its own child seed."""
    seeds = make_rng(spec.seed).integers(2**31 - 1, size=3)
    n_val = max(1, spec.n_train_per_class // 10)
    return {
        N.SPLIT_TRAIN: generate_synthetic(spec, spec.n_train_per_class, make_rng(int(seeds[0])), N.SPLIT_TRAIN),
        N.SPLIT_VAL: generate_synthetic(spec, n_val, make_rng(int(seeds[1])), N.SPLIT_VAL, correlation=spec.train_correlation),
        N.SPLIT_TEST: generate_synthetic(spec, spec.n_test_per_class, make_rng(int(seeds[2])), N.SPLIT_TEST),
    }


def empirical_mutual_information(a: np.ndarray, b: np.ndarray) -> float:
    """Plug-in mutual information estimate in nats between two discrete label arrays."""
    a, b = np.asarray(a), np.asarray(b)
    joint = np.zeros((a.max() + 1, b.max() + 1), dtype=np.float64)
    np.add.at(joint, (a, b), 1.0)
    joint /= joint.sum()
    pa, pb = joint.sum(axis=1, keepdims=True), joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float((joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])).sum())
