import logging

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import train_test_split
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from clfa.common import names as N
from clfa.common.errors import argument_error, config_error, data_error
from clfa.common.logger import fmsg
from clfa.data.schema import ImageDataset
from clfa.evaluation.metrics import ModelSource, resolve_model
from clfa.model.inference import dataset_features
from clfa.runs.run_schema import ProbeReport

logger = logging.getLogger(__name__)

MIN_PER_CLASS = 10
HELDOUT_FRACTION = 0.2


def feature_slice(features: np.ndarray, target: str) -> np.ndarray:
    half = features.shape[1] // 2
    if target == N.PROBE_FC:
        return features[:, :half]
    if target == N.PROBE_FB:
        return features[:, half:]
    if target == N.PROBE_FULL:
        return features
    raise argument_error(f"Unknown probe target '{target}', expected one of {list(N.PROBE_TARGETS)}.")


def fit_probe(x: np.ndarray, y: np.ndarray, seed: int = 0) -> tuple[float, float]:
    """Fixed stratified 80/20 split, multinomial logistic regression to tolerance 1e-6. Returns (train_acc, heldout_acc)."""
    counts = np.bincount(y)
    if counts[counts > 0].min() < MIN_PER_CLASS:
        raise data_error(f"Linear probe needs at least {MIN_PER_CLASS} samples per class, got {counts.tolist()}.")
    x_train, x_test, y_train, y_test = train_test_split(x, y, test_size=HELDOUT_FRACTION, stratify=y, random_state=seed)
    probe = make_pipeline(StandardScaler(), LogisticRegression(tol=1e-6, max_iter=10000))
    probe.fit(x_train, y_train)
    return float(probe.score(x_train, y_train)), float(probe.score(x_test, y_test))


def linear_probe(source: ModelSource, ds: ImageDataset, target: str, seed: int = 0, batch_size: int = 256) -> ProbeReport:
    """
    Fit a fresh linear classifier on a frozen feature slice (f_c, f_b or the full feature).

    Raises:
        ClfaError: DATA error when a class has fewer than 10 samples.
    """
    if target not in N.PROBE_TARGETS:
        raise argument_error(f"Unknown probe target '{target}', expected one of {list(N.PROBE_TARGETS)}.")
    model, checkpoint_ref = resolve_model(source)
    if ds.num_classes != model.cfg.num_classes:
        raise config_error(f"Dataset '{ds.name}' has {ds.num_classes} classes, the model predicts {model.cfg.num_classes}.")
    x = feature_slice(dataset_features(model, ds, batch_size), target)
    train_acc, heldout_acc = fit_probe(x, ds.labels, seed)
    report = ProbeReport(
        probe_target = target,
        train_acc = train_acc,
        heldout_acc = heldout_acc,
        chance = 1.0 / ds.num_classes,
        dataset = ds.name,
        checkpoint_ref = checkpoint_ref
    )
    logger.info(fmsg("Linear probe", target=target, train_acc=train_acc, heldout_acc=heldout_acc, chance=report.chance))
    return report
