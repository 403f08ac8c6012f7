"""Configuration schemas, profile files and the loader.

Every schema is a pydantic model. Field-level types are checked by pydantic, the semantic
rules are expressed the same way for every schema: a dict ``{field: [rule, ...]}`` where each
rule receives the field values as keyword arguments and returns an invalid-reason or None.
"""

import os
import copy
import tomllib
from importlib import resources
from typing import Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from clfa.common import names as N
from clfa.common.errors import config_error



# REGION: [Validation rules]

class ValidatedModel(BaseModel):

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    # DOC: Override to return { field: [ rule(**values) -> reason | None, ... ], ... }
    def _set_validation_rules(self) -> dict:
        return dict()

    def check_validation_rules(self):
        values = dict(self)
        invalid = dict()
        for field, rules in self._set_validation_rules().items():
            for rule in rules:
                reason = rule(**values)
                if reason is not None:
                    invalid[field] = reason
                    break
        if len(invalid) > 0:
            raise config_error(
                f"Invalid {type(self).__name__} fields: {list(invalid.keys())}. " + " ".join(invalid.values()),
                invalid = invalid
            )

    @model_validator(mode="after")
    def _run_validation_rules(self):
        self.check_validation_rules()
        return self

# ENDREGION: [Validation rules]



# REGION: [Schemas]

class TransformsConfig(ValidatedModel):

    enabled: Optional[list[str]] = Field(
        title = "Enabled strategies",
        description = "Strategy names or a single preset name (all16, ten, five, digits14, digits8, digits4). None uses the dataset safe set.",
        examples = [None, ["Brightness", "Rotate"], ["five"]],
        default = None
    )
    ranges: dict[str, tuple[float, float]] = Field(
        title = "Magnitude range overrides",
        description = "Per-strategy closed magnitude interval, written as transforms.<name>.range in TOML.",
        examples = [{}, {"Rotate": (-10.0, 10.0)}],
        default_factory = dict
    )
    composition_depth: int = Field(
        title = "Composition depth",
        description = "Number of strategies composed to synthesize one generated image.",
        examples = [1, 2],
        default = 1
    )

    @model_validator(mode="before")
    @classmethod
    def _collect_range_tables(cls, data):
        # DOC: TOML `transforms.Rotate.range = [a, b]` arrives as {"Rotate": {"range": [a, b]}}
        if not isinstance(data, dict):
            return data
        data = dict(data)
        ranges = dict(data.pop("ranges", dict()) or dict())
        for key in [k for k, v in data.items() if isinstance(v, dict) and "range" in v]:
            ranges[key] = tuple(data.pop(key)["range"])
        data["ranges"] = ranges
        return data

    def _set_validation_rules(self) -> dict:
        return {
            "ranges": [
                lambda **kw: f"Empty magnitude range in {kw['ranges']}."
                    if any(lo > hi for lo, hi in kw["ranges"].values()) else None
            ],
            "composition_depth": [
                lambda **kw: f"composition_depth must be >= 1, got {kw['composition_depth']}."
                    if kw["composition_depth"] < 1 else None
            ],
        }


class DataConfig(ValidatedModel):

    root: Optional[str] = Field(
        title = "Dataset root",
        description = "Folder dataset root (root/<class>/<images>). None with dataset_tag synthetic generates the synthetic splits.",
        examples = [None, "data/pacs/photo"],
        default = None
    )
    val_root: Optional[str] = Field(
        title = "Validation root",
        description = "Separate validation folder; None holds out val_fraction of every training class.",
        default = None
    )
    val_fraction: float = Field(title = "Validation fraction", description = "Per-class hold-out used for training-domain validation.", default = 0.1)

    def _set_validation_rules(self) -> dict:
        return {
            "val_fraction": [
                lambda **kw: f"val_fraction must be in [0, 1), got {kw['val_fraction']}."
                    if not 0.0 <= kw["val_fraction"] < 1.0 else None
            ],
        }


class ModelConfig(ValidatedModel):

    backbone: Literal["tiny_cnn", "convnet", "wrn16_4", "resnet18"] = Field(
        title = "Backbone",
        description = "Feature extractor trunk, followed by a linear projection to feature_dim.",
        default = N.TINY_CNN
    )
    feature_dim: int = Field(title = "d", description = "Length of the full latent feature, split in two halves.", default = 128)
    z_dim: int = Field(title = "z_dim", description = "Dimension of mu, log_var and z.", default = 32)
    encoder_hidden: int = Field(title = "Encoder hidden width", default = 64)
    augmentor_hidden: int = Field(title = "Augmentor hidden width", default = 128)
    num_classes: int = Field(title = "Number of classes", default = 4)
    image_size: int = Field(title = "Input image size", description = "Square input side in pixels.", default = 32)
    in_channels: int = Field(title = "Input channels", default = 3)
    backbone_width: int = Field(title = "Backbone width", description = "Base channel count of tiny_cnn.", default = 32)
    input_mean: tuple[float, float, float] = Field(title = "Normalization mean", default = (0.5, 0.5, 0.5))
    input_std: tuple[float, float, float] = Field(title = "Normalization std", default = (0.5, 0.5, 0.5))
    pretrained_path: Optional[str] = Field(
        title = "Pretrained backbone weights",
        description = "Path to a user-supplied state dict loaded into the backbone (resnet18 only).",
        default = None
    )

    def _set_validation_rules(self) -> dict:
        return {
            "feature_dim": [
                lambda **kw: f"feature_dim must be positive and even, got {kw['feature_dim']}."
                    if kw["feature_dim"] <= 0 or kw["feature_dim"] % 2 != 0 else None
            ],
            "z_dim": [lambda **kw: "z_dim must be positive." if kw["z_dim"] <= 0 else None],
            "encoder_hidden": [lambda **kw: "encoder_hidden must be positive." if kw["encoder_hidden"] <= 0 else None],
            "augmentor_hidden": [lambda **kw: "augmentor_hidden must be positive." if kw["augmentor_hidden"] <= 0 else None],
            "num_classes": [lambda **kw: "num_classes must be >= 2." if kw["num_classes"] < 2 else None],
            "image_size": [lambda **kw: "image_size must be >= 8." if kw["image_size"] < 8 else None],
            "backbone_width": [lambda **kw: "backbone_width must be positive." if kw["backbone_width"] <= 0 else None],
            "pretrained_path": [
                lambda **kw: f"pretrained_path not found: {kw['pretrained_path']}."
                    if kw["pretrained_path"] is not None and not os.path.exists(kw["pretrained_path"]) else None
            ],
        }

    @property
    def half_dim(self) -> int:
        return self.feature_dim // 2


class LossWeights(ValidatedModel):

    alpha1: float = Field(title = "alpha1", description = "Independence loss weight.", default = 0.5)
    alpha2: float = Field(title = "alpha2", description = "Augmentation loss weight.", default = 0.5)
    alpha3: float = Field(title = "alpha3", description = "Intervention loss weight.", default = 0.5)
    delta: float = Field(title = "delta", description = "Hinge margin of the augmentation loss.", default = 2.0)
    lambda_samples: int = Field(title = "lambda", description = "Latent augmentations sampled per iteration.", default = 5)
    pairing: Literal["full_product", "shuffled_k"] = Field(
        title = "Intervention pairing",
        description = "full_product enumerates every (causal, non-causal) pair, shuffled_k draws k random pairings per anchor.",
        default = N.SHUFFLED_K
    )
    pairs_per_anchor: Optional[int] = Field(
        title = "k",
        description = "Pairs per anchor for shuffled_k. None means one per causal vector (3 + 2 lambda).",
        default = None
    )

    def _set_validation_rules(self) -> dict:
        return {
            "alpha1": [lambda **kw: "alpha1 must be >= 0." if kw["alpha1"] < 0 else None],
            "alpha2": [lambda **kw: "alpha2 must be >= 0." if kw["alpha2"] < 0 else None],
            "alpha3": [lambda **kw: "alpha3 must be >= 0." if kw["alpha3"] < 0 else None],
            "delta": [lambda **kw: "delta must be > 0." if kw["delta"] <= 0 else None],
            "lambda_samples": [lambda **kw: "lambda_samples must be >= 1." if kw["lambda_samples"] < 1 else None],
            "pairs_per_anchor": [
                lambda **kw: "pairs_per_anchor must be >= 1."
                    if kw["pairs_per_anchor"] is not None and kw["pairs_per_anchor"] < 1 else None
            ],
        }


class TrainConfig(ValidatedModel):

    profile: Optional[str] = Field(title = "Profile", description = "Built-in profile the file is merged over.", default = None)
    dataset_tag: Literal["pacs", "digits", "cifar10", "office_home", "domainnet", "synthetic"] = Field(
        title = "Dataset tag",
        description = "Selects the semantics-safe transform subset.",
        default = N.SYNTHETIC
    )
    max_iters: int = Field(title = "Iterations", default = 40000)
    base_lr: float = Field(title = "Base learning rate", default = 1e-3)
    lr_halving_period: int = Field(title = "LR halving period", default = 10000)
    optimizer: Literal["adam"] = Field(title = "Optimizer", default = "adam")
    adam_betas: tuple[float, float] = Field(title = "Adam betas", default = (0.9, 0.999))
    adam_eps: float = Field(title = "Adam eps", default = 1e-8)
    weight_decay: float = Field(title = "Weight decay", default = 0.0)
    grad_clip: Optional[float] = Field(title = "Global-norm gradient clip", description = "None disables clipping.", default = None)
    seed: int = Field(title = "Seed", description = "Master seed, overridden by CLFA_SEED.", default = 0)
    triples_per_class: int = Field(title = "Triples per class", default = 8)
    eval_every: int = Field(title = "Evaluation interval", description = "0 disables periodic validation.", default = 1000)
    checkpoint_every: int = Field(title = "Checkpoint interval", description = "0 keeps only the final checkpoint.", default = 5000)
    log_every: int = Field(title = "Metrics interval", default = 50)
    patience: Optional[int] = Field(
        title = "Early-stopping patience",
        description = "Number of evaluations without validation improvement before stopping. None runs the full budget.",
        default = None
    )
    use_image_transforms: bool = Field(
        title = "Image-level transforms",
        description = "When false the generated member of each triple is the raw anchor.",
        default = True
    )
    use_encoder_ag: bool = Field(title = "Use E_ag", default = True)
    use_encoder_ap: bool = Field(title = "Use E_ap", default = True)
    log_provenance: bool = Field(title = "Provenance log", default = False)
    device: str = Field(title = "Device", description = "Torch device, overridden by CLFA_DEVICE.", default = "cpu")
    dtype: Literal["float32", "float64"] = Field(title = "Parameter dtype", default = "float32")
    deterministic: bool = Field(title = "Single-thread deterministic mode", default = True)
    eval_batch_size: int = Field(title = "Evaluation batch size", default = 256)

    data: DataConfig = Field(default_factory = DataConfig)
    weights: LossWeights = Field(default_factory = LossWeights)
    model: ModelConfig = Field(default_factory = ModelConfig)
    transforms: TransformsConfig = Field(default_factory = TransformsConfig)

    def _set_validation_rules(self) -> dict:
        return {
            "max_iters": [lambda **kw: "max_iters must be > 0." if kw["max_iters"] <= 0 else None],
            "base_lr": [lambda **kw: "base_lr must be > 0." if kw["base_lr"] <= 0 else None],
            "lr_halving_period": [lambda **kw: "lr_halving_period must be > 0." if kw["lr_halving_period"] <= 0 else None],
            "triples_per_class": [lambda **kw: "triples_per_class must be >= 1." if kw["triples_per_class"] < 1 else None],
            "eval_every": [lambda **kw: "eval_every must be >= 0." if kw["eval_every"] < 0 else None],
            "checkpoint_every": [lambda **kw: "checkpoint_every must be >= 0." if kw["checkpoint_every"] < 0 else None],
            "log_every": [lambda **kw: "log_every must be >= 1." if kw["log_every"] < 1 else None],
            "grad_clip": [lambda **kw: "grad_clip must be > 0." if kw["grad_clip"] is not None and kw["grad_clip"] <= 0 else None],
            "patience": [lambda **kw: "patience must be >= 1." if kw["patience"] is not None and kw["patience"] < 1 else None],
            "use_encoder_ap": [
                lambda **kw: "At least one of use_encoder_ag / use_encoder_ap must be enabled."
                    if not kw["use_encoder_ag"] and not kw["use_encoder_ap"] else None
            ],
        }

# ENDREGION: [Schemas]



# REGION: [Loading]

PROFILES = (N.PACS, N.DIGITS, N.CIFAR10, N.SYNTHETIC)


def deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def set_dotted(d: dict, dotted_key: str, value) -> dict:
    """Assign value at a dotted path such as weights.alpha1, creating tables as needed."""
    node = d
    parts = dotted_key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, dict())
    node[parts[-1]] = value
    return d


def read_toml(path) -> dict:
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except FileNotFoundError:
        raise config_error(f"Config file not found: {path}", path=str(path))
    except tomllib.TOMLDecodeError as e:
        raise config_error(f"Malformed config file {path}: {e}", path=str(path))


def profile_dict(profile: str) -> dict:
    if profile not in PROFILES:
        raise config_error(f"Unknown profile '{profile}', expected one of {list(PROFILES)}.", profile=profile)
    source = resources.files("clfa.configs").joinpath(f"{profile}.toml")
    with source.open("rb") as f:
        return tomllib.load(f)


def apply_environment(data: dict) -> dict:
    load_dotenv()
    data = copy.deepcopy(data)
    if os.environ.get(N.ENV_SEED):
        try:
            data["seed"] = int(os.environ[N.ENV_SEED])
        except ValueError:
            raise config_error(f"{N.ENV_SEED} must be an integer, got '{os.environ[N.ENV_SEED]}'.")
    if os.environ.get(N.ENV_DEVICE):
        data["device"] = os.environ[N.ENV_DEVICE]
    return data


def build_config(data: dict) -> TrainConfig:
    try:
        return TrainConfig.model_validate(data)
    except ValidationError as e:
        fields = [".".join(str(p) for p in err["loc"]) for err in e.errors()]
        raise config_error(f"Invalid configuration keys: {fields}.", errors=[err["msg"] for err in e.errors()])


def load_config(
    path: Optional[str] = None,
    profile: Optional[str] = None,
    overrides: Optional[dict] = None,
    use_environment: bool = True
) -> TrainConfig:
    """
    Load a TrainConfig.

    Args:
        path: Optional TOML file. Its `profile` key (or the profile argument) names the base profile.
        profile: Built-in profile used when the file names none.
        overrides: Dotted-key overrides applied last, before the environment.
        use_environment: Apply CLFA_SEED / CLFA_DEVICE.

    Returns:
        TrainConfig: the validated configuration.
    """
    user = read_toml(path) if path is not None else dict()
    profile = user.get("profile", profile)
    data = profile_dict(profile) if profile is not None else dict()
    data = deep_merge(data, user)
    if profile is not None:
        data["profile"] = profile
    for key, value in (overrides or dict()).items():
        set_dotted(data, key, value)
    if use_environment:
        data = apply_environment(data)
    return build_config(data)

# ENDREGION: [Loading]
