"""The finite set of explicit image-level transformation strategies.

Magnitudes are uniform over each strategy's closed range. The default ranges follow the usual
AutoAugment conventions, rescaled to float images in [0, 1]; they live in one table,
``MAGNITUDE_TABLE``, and can be overridden per strategy from the configuration.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import torch

from clfa.common import names as N
from clfa.common.errors import argument_error, config_error
from clfa.transforms import ops


# DOC: ImageTensor is an H x W x C float32 ndarray with values in [0, 1]
ImageTensor = np.ndarray

_RANGE_TOLERANCE = 1e-9


# REGION: [Strategy table]

# DOC: name -> (kind, (low, high), op)
MAGNITUDE_TABLE: dict[str, tuple[str, tuple[float, float], Callable]] = {
    N.BRIGHTNESS:     (N.PHOTOMETRIC, (0.1, 2.0), ops.brightness),
    N.CONTRAST:       (N.PHOTOMETRIC, (0.1, 2.0), ops.contrast),
    N.COLOR:          (N.PHOTOMETRIC, (0.1, 2.0), ops.color),
    N.SHARPNESS:      (N.PHOTOMETRIC, (0.1, 2.0), ops.sharpness),
    N.AUTO_CONTRAST:  (N.PHOTOMETRIC, (0.0, 0.0), ops.auto_contrast),
    N.INVERT:         (N.PHOTOMETRIC, (0.0, 0.0), ops.invert),
    N.EQUALIZE:       (N.PHOTOMETRIC, (0.0, 0.0), ops.equalize),
    N.SOLARIZE:       (N.PHOTOMETRIC, (0.0, 1.0), ops.solarize),
    N.SOLARIZE_ADD:   (N.PHOTOMETRIC, (0.0, 110.0 / 255.0), ops.solarize_add),
    N.POSTERIZE:      (N.PHOTOMETRIC, (4.0, 8.0), ops.posterize),
    N.NOISE_SALT:     (N.PHOTOMETRIC, (0.0, 0.1), ops.noise_salt),
    N.NOISE_GAUSSIAN: (N.PHOTOMETRIC, (0.0, 0.1), ops.noise_gaussian),
    N.SHEAR_X:        (N.GEOMETRIC, (-0.3, 0.3), ops.shear_x),
    N.SHEAR_Y:        (N.GEOMETRIC, (-0.3, 0.3), ops.shear_y),
    N.ROTATE:         (N.GEOMETRIC, (-30.0, 30.0), ops.rotate),
    N.FLIP:           (N.GEOMETRIC, (0.0, 0.0), ops.flip),
}

STRATEGY_NAMES = tuple(MAGNITUDE_TABLE.keys())

STOCHASTIC_STRATEGIES = frozenset({N.NOISE_SALT, N.NOISE_GAUSSIAN})

# DOC: Rotate and Flip change the meaning of digit images
SEMANTICS_UNSAFE = {
    N.ROTATE: frozenset(N.DIGIT_DATASETS),
    N.FLIP: frozenset(N.DIGIT_DATASETS),
}

PRESETS: dict[str, tuple[str, ...]] = {
    "all16": STRATEGY_NAMES,
    "ten": (N.BRIGHTNESS, N.CONTRAST, N.COLOR, N.SHARPNESS, N.AUTO_CONTRAST, N.INVERT, N.EQUALIZE, N.SOLARIZE,
            N.ROTATE, N.FLIP),
    "five": (N.BRIGHTNESS, N.CONTRAST, N.COLOR, N.SHARPNESS, N.ROTATE),
    "digits14": tuple(n for n in STRATEGY_NAMES if n not in (N.ROTATE, N.FLIP)),
    "digits8": (N.BRIGHTNESS, N.CONTRAST, N.COLOR, N.SHARPNESS, N.AUTO_CONTRAST, N.INVERT, N.SHEAR_X, N.SHEAR_Y),
    "digits4": (N.BRIGHTNESS, N.CONTRAST, N.SHEAR_X, N.SHEAR_Y),
}

# ENDREGION: [Strategy table]



@dataclass(frozen=True)
class TransformSpec:
    name: str
    kind: str
    magnitude_range: tuple[float, float]
    semantics_safe_for: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.name not in MAGNITUDE_TABLE:
            raise config_error(f"Unknown transform strategy '{self.name}'.", name=self.name)
        lo, hi = self.magnitude_range
        if lo > hi:
            raise config_error(f"Empty magnitude range {self.magnitude_range} for {self.name}.", name=self.name)

    @property
    def stochastic(self) -> bool:
        return self.name in STOCHASTIC_STRATEGIES

    def contains(self, magnitude: float) -> bool:
        lo, hi = self.magnitude_range
        return lo - _RANGE_TOLERANCE <= magnitude <= hi + _RANGE_TOLERANCE


def default_spec(name: str) -> TransformSpec:
    if name not in MAGNITUDE_TABLE:
        raise config_error(f"Unknown transform strategy '{name}'.", name=name)
    kind, magnitude_range, _ = MAGNITUDE_TABLE[name]
    unsafe = SEMANTICS_UNSAFE.get(name, frozenset())
    return TransformSpec(
        name = name,
        kind = kind,
        magnitude_range = magnitude_range,
        semantics_safe_for = frozenset(t for t in N.DATASET_TAGS if t not in unsafe)
    )


def resolve_names(names: Optional[Iterable[str]]) -> tuple[str, ...]:
    """Expand a preset name or validate a list of strategy names."""
    if names is None:
        return STRATEGY_NAMES
    names = [n.strip() for n in names if n and n.strip()]
    if len(names) == 1 and names[0] in PRESETS:
        return PRESETS[names[0]]
    unknown = [n for n in names if n not in MAGNITUDE_TABLE]
    if unknown:
        raise config_error(f"Unknown transform strategies: {unknown}.", unknown=unknown)
    return tuple(dict.fromkeys(names))



# REGION: [Single image operations]

def _check_image(img: ImageTensor):
    if not isinstance(img, np.ndarray) or img.ndim != 3:
        raise argument_error(f"Expected an H x W x C array, got {getattr(img, 'shape', type(img))}.")
    if img.size == 0 or not np.isfinite(img).all() or img.min() < 0.0 or img.max() > 1.0:
        raise argument_error("Image values must be finite and within [0, 1].")


def apply_transform(
    img: ImageTensor,
    spec: TransformSpec,
    magnitude: float,
    rng: Optional[np.random.Generator] = None
) -> ImageTensor:
    """
    Apply one strategy to a copy of img.

    Args:
        img: H x W x C float image in [0, 1]; it is not modified.
        spec: The strategy.
        magnitude: Must lie in spec.magnitude_range.
        rng: Random source, required by the noise strategies.

    Returns:
        ImageTensor: a new float32 image, clipped to [0, 1], same shape as img.
    """
    if spec.name not in MAGNITUDE_TABLE:
        raise config_error(f"Unknown transform strategy '{spec.name}'.", name=spec.name)
    if not spec.contains(magnitude):
        raise argument_error(
            f"Magnitude {magnitude} outside {spec.magnitude_range} for {spec.name}.",
            name = spec.name, magnitude = magnitude
        )
    if spec.stochastic and rng is None:
        raise argument_error(f"{spec.name} needs a seeded random source.", name=spec.name)
    _check_image(img)

    _, _, op = MAGNITUDE_TABLE[spec.name]
    tensor = torch.from_numpy(np.ascontiguousarray(img, dtype=np.float32)).permute(2, 0, 1).clone()
    out = op(tensor, float(magnitude), rng=rng).clamp(0.0, 1.0)
    return out.permute(1, 2, 0).contiguous().numpy().astype(np.float32, copy=False)


def compose(
    img: ImageTensor,
    specs: Sequence[tuple[TransformSpec, float]],
    rng: Optional[np.random.Generator] = None
) -> ImageTensor:
    """Apply (spec, magnitude) pairs left to right. An empty list returns a copy of img."""
    _check_image(img)
    out = np.array(img, dtype=np.float32, copy=True)
    for spec, magnitude in specs:
        out = apply_transform(out, spec, magnitude, rng=rng)
    return out

# ENDREGION: [Single image operations]



class TransformBank:
    """The enabled strategy set with its magnitude table, for one run."""

    def __init__(self, enabled: Optional[Iterable[str]] = None, ranges: Optional[dict] = None, composition_depth: int = 1):
        if composition_depth < 1:
            raise config_error(f"composition_depth must be >= 1, got {composition_depth}.")
        ranges = ranges or dict()
        unknown = [n for n in ranges if n not in MAGNITUDE_TABLE]
        if unknown:
            raise config_error(f"Range overrides for unknown strategies: {unknown}.", unknown=unknown)
        self.composition_depth = composition_depth
        self.specs: dict[str, TransformSpec] = dict()
        for name in resolve_names(enabled):
            spec = default_spec(name)
            if name in ranges:
                spec = replace(spec, magnitude_range=tuple(float(v) for v in ranges[name]))
            self.specs[name] = spec

    @classmethod
    def from_config(cls, transforms_cfg) -> "TransformBank":
        return cls(
            enabled = transforms_cfg.enabled,
            ranges = transforms_cfg.ranges,
            composition_depth = transforms_cfg.composition_depth
        )

    def spec(self, name: str) -> TransformSpec:
        if name not in self.specs:
            raise config_error(f"Strategy '{name}' is not enabled in this bank.", name=name)
        return self.specs[name]

    def safe_subset(self, dataset_tag: str) -> list[TransformSpec]:
        if dataset_tag not in N.DATASET_TAGS:
            raise config_error(f"Unknown dataset tag '{dataset_tag}'.", dataset_tag=dataset_tag)
        return [spec for spec in self.specs.values() if dataset_tag in spec.semantics_safe_for]

    def sample_strategy(self, rng: np.random.Generator, dataset_tag: str) -> tuple[TransformSpec, float]:
        """Draw one safe strategy uniformly, then its magnitude uniformly over the range."""
        subset = self.safe_subset(dataset_tag)
        if len(subset) == 0:
            raise config_error(f"No enabled transform strategy is safe for '{dataset_tag}'.", dataset_tag=dataset_tag)
        spec = subset[int(rng.integers(len(subset)))]
        lo, hi = spec.magnitude_range
        magnitude = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
        return spec, magnitude

    def sample_chain(self, rng: np.random.Generator, dataset_tag: str) -> list[tuple[TransformSpec, float]]:
        return [self.sample_strategy(rng, dataset_tag) for _ in range(self.composition_depth)]

    def apply(self, img: ImageTensor, chain: Sequence[tuple[TransformSpec, float]], rng=None) -> ImageTensor:
        return compose(img, chain, rng=rng)

    def __len__(self):
        return len(self.specs)

    def __contains__(self, name):
        return name in self.specs


# DOC: module-level bank with every strategy enabled
DEFAULT_BANK = TransformBank()


def sample_strategy(rng: np.random.Generator, dataset_tag: str, bank: Optional[TransformBank] = None) -> tuple[TransformSpec, float]:
    return (bank or DEFAULT_BANK).sample_strategy(rng, dataset_tag)
