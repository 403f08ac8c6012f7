# DOC: Batched read-only passes of a model over a whole dataset

import numpy as np
import torch

from clfa.common.errors import data_error
from clfa.data.schema import ImageDataset
from clfa.model.core import CausalFeatureModel


def _batches(ds: ImageDataset, batch_size: int):
    for start in range(0, len(ds), batch_size):
        yield ds.images[start:start + batch_size]


@torch.no_grad()
def predict_dataset(model: CausalFeatureModel, ds: ImageDataset, batch_size: int = 256) -> np.ndarray:
    """Predicted class indices for every sample, in dataset order. The model is left in eval mode."""
    if len(ds) == 0:
        raise data_error(f"Dataset '{ds.name}' is empty.", dataset=ds.name)
    model.eval()
    return np.concatenate([model.predict(model.to_input(images)).cpu().numpy() for images in _batches(ds, batch_size)])


def dataset_accuracy(model: CausalFeatureModel, ds: ImageDataset, batch_size: int = 256) -> float:
    return float((predict_dataset(model, ds, batch_size) == ds.labels).mean())


@torch.no_grad()
def dataset_features(model: CausalFeatureModel, ds: ImageDataset, batch_size: int = 256) -> np.ndarray:
    """N x d float64 matrix of full features; columns [:d/2] are f_c, [d/2:] are f_b."""
    if len(ds) == 0:
        raise data_error(f"Dataset '{ds.name}' is empty.", dataset=ds.name)
    model.eval()
    return np.concatenate([
        model.extract(model.to_input(images)).full.cpu().double().numpy() for images in _batches(ds, batch_size)
    ])
