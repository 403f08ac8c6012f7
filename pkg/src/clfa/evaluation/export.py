"""CSV exports behind the embedding and meta-knowledge visualisations."""

import logging

import pandas as pd
import torch

from clfa.common import names as N
from clfa.common.errors import argument_error
from clfa.common.logger import fmsg
from clfa.common.utils import atomic_write, make_torch_generator, normpath
from clfa.data.schema import ImageDataset, Triple
from clfa.evaluation.metrics import ModelSource, resolve_model
from clfa.model.inference import dataset_features

logger = logging.getLogger(__name__)


def _write_csv(frame: pd.DataFrame, out: str) -> str:
    return atomic_write(out, lambda tmp: frame.to_csv(tmp, index=False, float_format="%.8g", lineterminator="\n"))


def embedding_frame(source: ModelSource, ds: ImageDataset, batch_size: int = 256) -> pd.DataFrame:
    model, _ = resolve_model(source)
    features = dataset_features(model, ds, batch_size)
    half = features.shape[1] // 2
    frame = pd.DataFrame({
        "sample_id": list(ds.sample_ids),
        "label": ds.labels,
        "domain_tag": list(ds.domain_tags),
    })
    coords = pd.DataFrame(features, columns=[f"fc_{i}" for i in range(half)] + [f"fb_{i}" for i in range(half)])
    return pd.concat([frame, coords], axis=1)


def export_embeddings(source: ModelSource, ds: ImageDataset, out: str, batch_size: int = 256) -> str:
    """
    Write sample_id, label, domain_tag, fc_0..fc_{d/2-1}, fb_0..fb_{d/2-1}, one row per sample.

    Raises:
        ClfaError: IO error when out cannot be written.
    """
    frame = embedding_frame(source, ds, batch_size)
    path = _write_csv(frame, out)
    logger.info(fmsg("Embeddings exported", out=normpath(out), rows=len(frame), columns=frame.shape[1]))
    return path


@torch.no_grad()
def export_meta_samples(source: ModelSource, triple: Triple, out: str, n_samples: int = 200, seed: int = 0) -> str:
    """
    Sample n_samples implicit transformations from each encoder branch for one triple.

    Rows hold encoder (ag or ap), half (c or b), the sample index and the augmented half coordinates
    a_0..a_{d/2-1}; the sampled z is in z_0..z_{z_dim-1}.
    """
    if n_samples < 1:
        raise argument_error(f"n_samples must be >= 1, got {n_samples}.")
    model, _ = resolve_model(source)
    generator = make_torch_generator(seed)
    feats = model.extract(model.to_input([triple.anchor.image, triple.positive.image, triple.generated.image]))
    anchor = { N.CAUSAL: feats.f_c[0:1], N.NONCAUSAL: feats.f_b[0:1] }
    other = {
        N.AG: { N.CAUSAL: feats.f_c[2:3], N.NONCAUSAL: feats.f_b[2:3] },
        N.AP: { N.CAUSAL: feats.f_c[1:2], N.NONCAUSAL: feats.f_b[1:2] },
    }

    rows = []
    for e in N.ENCODER_IDS:
        for t in N.FEATURE_HALVES:
            mk = model.encode_meta(e, anchor[t], other[e][t])
            mk_many = type(mk)(mk.mu.expand(n_samples, -1), mk.log_var.expand(n_samples, -1))
            z = model.reparameterize(mk_many, model.sample_eps(mk_many, generator))
            augmented = model.augment(anchor[t].expand(n_samples, -1), z)
            frame = pd.DataFrame(augmented.cpu().double().numpy(), columns=[f"a_{i}" for i in range(augmented.shape[1])])
            frame = pd.concat([frame, pd.DataFrame(z.cpu().double().numpy(), columns=[f"z_{i}" for i in range(z.shape[1])])], axis=1)
            frame.insert(0, "sample", range(n_samples))
            frame.insert(0, "half", t)
            frame.insert(0, "encoder", e)
            rows.append(frame)
    frame = pd.concat(rows, ignore_index=True)
    frame.insert(0, "anchor_id", triple.anchor.sample_id)
    path = _write_csv(frame, out)
    logger.info(fmsg("Meta-knowledge samples exported", out=normpath(out), rows=len(frame)))
    return path
