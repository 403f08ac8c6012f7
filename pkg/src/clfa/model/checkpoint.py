"""Checkpoint archives: parameters keyed by component name, the model configuration and the training state."""

import os
import logging
from typing import Any, Optional

import torch

from clfa.common.config import ModelConfig, TrainConfig
from clfa.common.errors import config_error, io_error
from clfa.common.logger import fmsg
from clfa.common.utils import atomic_write, normpath
from clfa.model.core import CausalFeatureModel, build_model

logger = logging.getLogger(__name__)


def save_checkpoint(
    path: str,
    model: CausalFeatureModel,
    iteration: int,
    train_cfg: Optional[TrainConfig] = None,
    optimizer_state: Optional[dict] = None,
    rng_state: Optional[dict] = None,
    extra: Optional[dict] = None
) -> str:
    """
    Write a checkpoint atomically.

    Args:
        path: Destination file; a temp sibling is written first and renamed into place.
        model: Source of the parameters.
        iteration: Completed optimizer steps.
        train_cfg: Training configuration, stored as a plain dict.
        optimizer_state: optimizer.state_dict().
        rng_state: Random source states needed to resume the exact trajectory.
        extra: Any further JSON-like payload (best validation accuracy, ...).

    Raises:
        ClfaError: IO error, the partial file is removed.
    """
    payload = {
        "components": { name: module.state_dict() for name, module in model.components.items() },
        "model_config": model.cfg.model_dump(mode="json"),
        "class_names": list(model.class_names) if model.class_names is not None else None,
        "train_config": train_cfg.model_dump(mode="json") if train_cfg is not None else None,
        "iteration": int(iteration),
        "optimizer": optimizer_state,
        "rng": rng_state,
        "extra": extra or dict(),
    }
    atomic_write(path, lambda tmp: torch.save(payload, tmp))
    logger.debug(fmsg("Checkpoint written", path=normpath(path), iteration=iteration))
    return normpath(path)


def read_checkpoint(path: str, map_location: str = "cpu") -> dict[str, Any]:
    path = normpath(path)
    if not os.path.isfile(path):
        raise io_error(f"Checkpoint not found: {path}", path=path)
    try:
        payload = torch.load(path, map_location=map_location, weights_only=False)
    except (OSError, RuntimeError, EOFError) as e:
        raise io_error(f"Unreadable checkpoint {path}: {e}", path=path)
    missing = [k for k in ("components", "model_config", "iteration") if k not in payload]
    if missing:
        raise io_error(f"Checkpoint {path} lacks {missing}.", path=path)
    return payload


def restore_model(model: CausalFeatureModel, payload: dict):
    components = payload["components"]
    absent = [name for name in model.components if name not in components]
    if absent:
        raise config_error(f"Checkpoint has no parameters for components {absent}.", absent=absent)
    for name, module in model.components.items():
        try:
            module.load_state_dict(components[name])
        except RuntimeError as e:
            raise config_error(f"Checkpoint parameters of {name} do not fit the model: {e}", component=name)
    return model


def load_model(path: str, device: str = "cpu") -> tuple[CausalFeatureModel, dict]:
    """Rebuild the model stored in a checkpoint. Returns (model in eval mode, payload)."""
    payload = read_checkpoint(path)
    model_cfg = ModelConfig.model_validate({ **payload["model_config"], "pretrained_path": None })
    dtype = (payload.get("train_config") or dict()).get("dtype", "float32")
    model = restore_model(build_model(model_cfg, dtype=dtype, device=device), payload)
    if payload.get("class_names") is not None:
        model.class_names = tuple(payload["class_names"])
    model.eval()
    return model, payload
