import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Mapping, Optional, Sequence, Union

from clfa.common import names as N
from clfa.common.errors import config_error, data_error
from clfa.common.logger import fmsg
from clfa.data.schema import ImageDataset
from clfa.model.checkpoint import load_model
from clfa.model.core import CausalFeatureModel
from clfa.model.inference import dataset_accuracy
from clfa.runs.run_schema import MetricsRecord

logger = logging.getLogger(__name__)

ModelSource = Union[CausalFeatureModel, str]


def resolve_model(source: ModelSource, device: str = "cpu") -> tuple[CausalFeatureModel, Optional[str]]:
    """A loaded model, or a checkpoint path to load. Returns (model in eval mode, checkpoint path or None)."""
    if isinstance(source, CausalFeatureModel):
        source.eval()
        return source, None
    model, _ = load_model(source, device=device)
    return model, str(source)


def _as_targets(targets: Union[Mapping[str, ImageDataset], Sequence[ImageDataset]]) -> dict[str, ImageDataset]:
    if isinstance(targets, Mapping):
        return dict(targets)
    named = dict()
    for i, ds in enumerate(targets):
        named[ds.name or f"target{i}"] = ds
    if len(named) != len(targets):
        raise data_error("Target datasets need distinct names.")
    return named


def evaluate(
    source: ModelSource,
    targets: Union[Mapping[str, ImageDataset], Sequence[ImageDataset]],
    protocol: str = N.SINGLE_DG,
    seed: Optional[int] = None,
    batch_size: int = 256,
    workers: int = 1,
    selection: Optional[str] = None
) -> MetricsRecord:
    """
    Top-1 accuracy of predict on every target and their unweighted mean.

    Args:
        source: Model or checkpoint path.
        targets: {name: dataset} or datasets named by their name attribute.
        protocol: Protocol tag stored in the record.
        seed: Seed of the evaluated run.
        batch_size: Inference batch size.
        workers: Targets evaluated concurrently on the shared read-only model.
        selection: Model-selection rule recorded with the result.

    Raises:
        ClfaError: CONFIG error when a target's class count or class list differs from the model's, DATA error on an empty target.
    """
    model, checkpoint_ref = resolve_model(source)
    targets = _as_targets(targets)
    if len(targets) == 0:
        raise data_error("No target datasets to evaluate.")
    for name, ds in targets.items():
        if ds.num_classes != model.cfg.num_classes:
            raise config_error(
                f"Target '{name}' has {ds.num_classes} classes, the model predicts {model.cfg.num_classes}.",
                target = name
            )
        if model.class_names is not None and tuple(ds.class_names) != tuple(model.class_names):
            raise config_error(
                f"Target '{name}' classes {list(ds.class_names)} are not the training classes {list(model.class_names)}.",
                target = name
            )
        if len(ds) == 0:
            raise data_error(f"Target '{name}' is empty.", target=name)

    def accuracy(item):
        name, ds = item
        return name, dataset_accuracy(model, ds, batch_size)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_target = dict(pool.map(accuracy, targets.items()))
    else:
        per_target = dict(map(accuracy, targets.items()))
    per_target = { name: per_target[name] for name in targets }

    record = MetricsRecord(
        protocol = protocol,
        per_target = per_target,
        seed = seed,
        checkpoint_ref = checkpoint_ref,
        selection = selection
    )
    logger.info(fmsg("Evaluated", protocol=protocol, average=record.average, **{ f"acc_{k}": v for k, v in per_target.items() }))
    return record
