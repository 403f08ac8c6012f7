"""One training iteration: triple features, meta-knowledge, λ-fold latent augmentation, losses, update."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import torch

from clfa.common import names as N
from clfa.common.config import TrainConfig
from clfa.common.errors import argument_error, numeric_error
from clfa.common.logger import fmsg
from clfa.common.states import TrainState
from clfa.data.schema import Triple
from clfa.model.core import CausalFeatureModel, FeaturePair
from clfa.objectives.losses import LossBundle, loss_aug, loss_cls, loss_ind, loss_int, total_loss

logger = logging.getLogger(__name__)


def lr_at(iteration: int, cfg: TrainConfig) -> float:
    """base_lr halved every lr_halving_period iterations."""
    if iteration < 0:
        raise argument_error(f"iteration must be >= 0, got {iteration}.")
    return cfg.base_lr * 0.5 ** (iteration // cfg.lr_halving_period)


def enabled_encoders(cfg: TrainConfig) -> tuple[str, ...]:
    return tuple(e for e, on in ((N.AG, cfg.use_encoder_ag), (N.AP, cfg.use_encoder_ap)) if on)



@dataclass
class ObjectiveTerms:
    """Losses of one batch together with the per-anchor sets fed to the intervention loss."""
    bundle: LossBundle
    causal_set: torch.Tensor        # DOC: (n, S, d/2)
    noncausal_set: torch.Tensor     # DOC: (n, S, d/2)


def _stack_pairs(pairs: Sequence[FeaturePair]) -> FeaturePair:
    return FeaturePair(torch.stack([p.f_c for p in pairs]), torch.stack([p.f_b for p in pairs]))


def forward_objective(
    model: CausalFeatureModel,
    batch: Sequence[Triple],
    cfg: TrainConfig,
    generator: Optional[torch.Generator] = None
) -> ObjectiveTerms:
    """
    Compute every loss term for a batch of triples.

    The anchor, positive and generated images go through F together. For t in {c, b} E_ag encodes
    (f_t^a, f_t^g) and E_ap encodes (f_t^a, f_t^p); each of the λ passes draws fresh ε per sample,
    branch and half and augments the anchor half through the shared A. The causal set of an anchor is
    {f_c^a, f_c^p, f_c^g} plus its augmented causal halves, the non-causal set likewise, so each holds
    3 + λ·(number of enabled encoders) vectors.
    """
    if len(batch) == 0:
        raise argument_error("Empty batch.")
    n = len(batch)
    weights = cfg.weights
    encoders = enabled_encoders(cfg)

    images = [t.anchor.image for t in batch] + [t.positive.image for t in batch] + [t.generated.image for t in batch]
    labels = torch.tensor([t.label for t in batch], dtype=torch.long, device=model.device)
    feats = model.extract(model.to_input(images))
    anchor = FeaturePair(feats.f_c[:n], feats.f_b[:n])
    positive = FeaturePair(feats.f_c[n:2 * n], feats.f_b[n:2 * n])
    generated = FeaturePair(feats.f_c[2 * n:], feats.f_b[2 * n:])
    other = { N.AG: generated, N.AP: positive }

    meta = {
        (e, t): model.encode_meta(e, getattr(anchor, f"f_{t}"), getattr(other[e], f"f_{t}"))
        for e in encoders for t in N.FEATURE_HALVES
    }

    augmented = { e: [] for e in encoders }
    for _ in range(weights.lambda_samples):
        for e in encoders:
            halves = []
            for t in N.FEATURE_HALVES:
                mk = meta[(e, t)]
                z = model.reparameterize(mk, model.sample_eps(mk, generator))
                halves.append(model.augment(getattr(anchor, f"f_{t}"), z))
            augmented[e].append(FeaturePair(*halves))
    augmented = { e: _stack_pairs(pairs) for e, pairs in augmented.items() }     # DOC: (λ, n, d/2) halves

    init_pairs = FeaturePair(feats.f_c, feats.f_b)
    init_labels = labels.repeat(3)
    aug_pairs = FeaturePair(
        torch.cat([augmented[e].f_c.reshape(-1, anchor.f_c.shape[-1]) for e in encoders]),
        torch.cat([augmented[e].f_b.reshape(-1, anchor.f_b.shape[-1]) for e in encoders]),
    )
    aug_labels = labels.repeat(weights.lambda_samples * len(encoders))

    l_cls = loss_cls(init_pairs, init_labels, model.H) + loss_cls(aug_pairs, aug_labels, model.H)
    l_ind = loss_ind(init_pairs) + loss_ind(aug_pairs)
    l_aug = loss_aug(anchor, augmented, weights.delta)

    # DOC: per anchor, (λ, n, d/2) -> (n, λ, d/2) and interleave branches per pass
    def per_anchor(t: str) -> torch.Tensor:
        init = [getattr(anchor, f"f_{t}"), getattr(positive, f"f_{t}"), getattr(generated, f"f_{t}")]
        sampled = torch.stack([getattr(augmented[e], f"f_{t}") for e in encoders], dim=1)
        sampled = sampled.reshape(-1, n, anchor.f_c.shape[-1]).transpose(0, 1)
        return torch.cat([torch.stack(init, dim=1), sampled], dim=1)

    causal_set, noncausal_set = per_anchor(N.CAUSAL), per_anchor(N.NONCAUSAL)
    l_int = loss_int(
        causal_set, noncausal_set, labels, model.H, model.M,
        rng = generator, pairing = weights.pairing, k = weights.pairs_per_anchor
    )
    return ObjectiveTerms(total_loss(l_cls, l_ind, l_aug, l_int, weights), causal_set, noncausal_set)



def train_step(state: TrainState, batch: Sequence[Triple], cfg: TrainConfig) -> tuple[TrainState, LossBundle]:
    """
    One optimizer step on all of Ω at lr_at(state.iteration).

    Raises:
        ClfaError: NUMERIC error with the per-term values when the loss is not finite. No update is applied.
    """
    model, optimizer = state.model, state.optimizer
    model.train()
    lr = lr_at(state.iteration, cfg)
    for group in optimizer.param_groups:
        group["lr"] = lr
    optimizer.zero_grad(set_to_none=True)

    terms = forward_objective(model, batch, cfg, state.torch_rng)
    bundle = terms.bundle
    if not bundle.is_finite:
        dump = bundle.as_dict
        logger.error(fmsg("Non-finite loss", iteration=state.iteration, **dump))
        raise numeric_error(f"Non-finite loss at iteration {state.iteration}: {dump}", iteration=state.iteration, terms=dump)

    bundle.total.backward()
    if cfg.grad_clip is not None:
        torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
    optimizer.step()
    state.iteration += 1
    return state, bundle
