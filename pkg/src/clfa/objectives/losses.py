"""The four loss terms and their weighted total.

Every term reduces by the arithmetic mean over the batch. Probabilities are clamped at
``PROB_FLOOR`` before any logarithm.
"""

import math
import logging
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import torch

from clfa.common import names as N
from clfa.common.config import LossWeights
from clfa.common.errors import argument_error
from clfa.common.logger import fmsg
from clfa.model.core import FeaturePair

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-8



# REGION: [Probability helpers]

def clamped_log(p: torch.Tensor) -> torch.Tensor:
    return torch.log(p.clamp_min(PROB_FLOOR))


def cross_entropy_from_probs(p: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """-log p[y] per row; p is (..., K), labels has the leading shape of p."""
    return -clamped_log(p).gather(-1, labels.unsqueeze(-1)).squeeze(-1)


def kl_uniform(p: torch.Tensor) -> torch.Tensor:
    """KL(uniform ‖ p) per row."""
    k = p.shape[-1]
    return -math.log(k) - clamped_log(p).mean(dim=-1)


def kl_divergence(p: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
    """KL(p ‖ q) per row."""
    return (p * (clamped_log(p) - clamped_log(q))).sum(dim=-1)

# ENDREGION: [Probability helpers]



# REGION: [Classification]

def classification_loss(p_c: torch.Tensor, p_b: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """mean over rows of CE(p_c, y) + KL(uniform ‖ p_b)."""
    if p_c.shape[0] == 0:
        raise argument_error("loss_cls needs at least one member.")
    if p_c.shape != p_b.shape or labels.shape[0] != p_c.shape[0]:
        raise argument_error("p_c, p_b and labels must describe the same members.")
    return (cross_entropy_from_probs(p_c, labels) + kl_uniform(p_b)).mean()


def loss_cls(pairs: FeaturePair, labels: torch.Tensor, classifier: Callable) -> torch.Tensor:
    """
    Decoupled classification loss.

    The causal half must predict the label through H while H applied to the non-causal half must stay
    close to the uniform distribution.

    Args:
        pairs: Batched FeaturePair, halves of shape (n, d/2).
        labels: (n,) class indices.
        classifier: H, mapping a half to logits.
    """
    if pairs.f_c.shape[0] == 0:
        raise argument_error("loss_cls needs at least one member.")
    p_c = torch.softmax(classifier(pairs.f_c), dim=-1)
    p_b = torch.softmax(classifier(pairs.f_b), dim=-1)
    return classification_loss(p_c, p_b, labels)

# ENDREGION: [Classification]



def loss_ind(pairs: FeaturePair) -> torch.Tensor:
    """Mean of ½·cos²(f_c, f_b). A zero-norm half contributes a correlation of 0."""
    f_c, f_b = pairs
    if f_c.shape[0] == 0:
        raise argument_error("loss_ind needs at least one pair.")
    if f_c.shape != f_b.shape:
        raise argument_error(f"f_c and f_b shapes differ: {list(f_c.shape)} vs {list(f_b.shape)}.")
    dot = (f_c * f_b).sum(dim=-1)
    norms = f_c.norm(dim=-1) * f_b.norm(dim=-1)
    degenerate = norms == 0
    if bool(degenerate.any()):
        logger.warning(fmsg("Zero-norm feature half, correlation set to 0", count=int(degenerate.sum())))
    correlation = torch.where(degenerate, torch.zeros_like(dot), dot / torch.where(degenerate, torch.ones_like(norms), norms))
    return (0.5 * correlation ** 2).mean()


def loss_aug(anchor: FeaturePair, augmented: Mapping[str, FeaturePair], delta: float) -> torch.Tensor:
    """
    Augmentation loss over the encoder branches.

    For each branch v the augmented causal half must stay close to the anchor's causal half while
    the augmented non-causal half moves away from the anchor's by at least delta more:
    d_c + max(d_c - d_b + delta, 0) with squared Euclidean distances, averaged over the λ samples
    and the batch, then summed over branches.

    Args:
        anchor: FeaturePair with halves (n, d/2).
        augmented: branch -> FeaturePair with halves (λ, n, d/2).
        delta: Margin, > 0.
    """
    if delta <= 0:
        raise argument_error(f"delta must be > 0, got {delta}.")
    if len(augmented) == 0:
        raise argument_error("loss_aug needs at least one branch.")
    total = anchor.f_c.new_zeros(())
    for branch, aug in augmented.items():
        if aug.f_c.shape[-2:] != anchor.f_c.shape or aug.f_b.shape[-2:] != anchor.f_b.shape:
            raise argument_error(
                f"Augmented halves of branch {branch} must end in {list(anchor.f_c.shape)}.",
                branch = branch, got = list(aug.f_c.shape)
            )
        d_c = ((aug.f_c - anchor.f_c) ** 2).sum(dim=-1)
        d_b = ((aug.f_b - anchor.f_b) ** 2).sum(dim=-1)
        total = total + (d_c + torch.relu(d_c - d_b + delta)).mean()
    return total



# REGION: [Intervention]

def intervention_pairs(
    num_anchors: int,
    n_causal: int,
    n_noncausal: int,
    pairing: str = N.FULL_PRODUCT,
    k: Optional[int] = None,
    generator: Optional[torch.Generator] = None
) -> tuple[torch.Tensor, torch.Tensor]:
    """
    Indices (causal, non-causal) of the pairs classified per anchor, each (num_anchors, P).

    full_product enumerates all n_causal * n_noncausal pairs. shuffled_k with k=None pairs every
    causal vector with one non-causal vector of a random permutation; with an explicit k it draws k
    pairs uniformly with replacement.
    """
    if n_causal < 1 or n_noncausal < 1:
        raise argument_error("Intervention sets must be nonempty.")
    if pairing == N.FULL_PRODUCT:
        c_idx = torch.arange(n_causal).repeat_interleave(n_noncausal)
        b_idx = torch.arange(n_noncausal).repeat(n_causal)
        return c_idx.expand(num_anchors, -1), b_idx.expand(num_anchors, -1)
    if pairing != N.SHUFFLED_K:
        raise argument_error(f"Unknown pairing '{pairing}'.", pairing=pairing)
    if k is None:
        c_idx = torch.arange(n_causal).expand(num_anchors, -1)
        b_idx = torch.stack([
            torch.randperm(n_noncausal, generator=generator)[torch.arange(n_causal) % n_noncausal]
            for _ in range(num_anchors)
        ])
        return c_idx, b_idx
    if k < 1:
        raise argument_error(f"k must be >= 1, got {k}.")
    c_idx = torch.randint(n_causal, (num_anchors, k), generator=generator)
    b_idx = torch.randint(n_noncausal, (num_anchors, k), generator=generator)
    return c_idx, b_idx


def _gather_rows(sets: torch.Tensor, idx: torch.Tensor) -> torch.Tensor:
    return sets.gather(1, idx.to(sets.device).unsqueeze(-1).expand(-1, -1, sets.shape[-1]))


def loss_int(
    causal_set: torch.Tensor,
    noncausal_set: torch.Tensor,
    labels: torch.Tensor,
    classifier: Callable,
    reducer: Callable,
    rng: Optional[torch.Generator] = None,
    pairing: str = N.FULL_PRODUCT,
    k: Optional[int] = None
) -> torch.Tensor:
    """
    Intervention loss.

    Every causal vector is combined with non-causal vectors of its anchor's set acting as
    confounders; the combination H(M(f̃_c ⊕ f̃_b)) must predict the causal vector's label and agree
    with H(f̃_c): CE(H(M(.)), y) + KL(H(f̃_c) ‖ H(M(.))), averaged over all selected pairs.

    Args:
        causal_set: (n, S_c, d/2) per-anchor causal vectors.
        noncausal_set: (n, S_b, d/2) per-anchor non-causal vectors.
        labels: (n,) anchor labels or (n, S_c) per-causal labels.
        classifier: H.
        reducer: M, mapping a length-d concatenation to d/2.
        rng: Drives shuffled pairing.
        pairing: full_product or shuffled_k.
        k: Pairs per anchor for shuffled_k.
    """
    if causal_set.ndim != 3 or noncausal_set.ndim != 3 or causal_set.shape[0] != noncausal_set.shape[0]:
        raise argument_error(
            "causal_set and noncausal_set must be (n, S, d/2) with the same n.",
            causal = list(causal_set.shape), noncausal = list(noncausal_set.shape)
        )
    if causal_set.shape[0] == 0 or causal_set.shape[1] == 0 or noncausal_set.shape[1] == 0:
        raise argument_error("Intervention sets must be nonempty.")
    n, s_c, _ = causal_set.shape
    if labels.ndim == 1:
        labels = labels.unsqueeze(1).expand(n, s_c)

    c_idx, b_idx = intervention_pairs(n, s_c, noncausal_set.shape[1], pairing, k, rng)
    f_c = _gather_rows(causal_set, c_idx)
    f_b = _gather_rows(noncausal_set, b_idx)
    y = labels.gather(1, c_idx.to(labels.device))

    p_int = torch.softmax(classifier(reducer(torch.cat([f_c, f_b], dim=-1))), dim=-1)
    p_c = torch.softmax(classifier(f_c), dim=-1)
    return (cross_entropy_from_probs(p_int, y) + kl_divergence(p_c, p_int)).mean()

# ENDREGION: [Intervention]



@dataclass
class LossBundle:
    cls: torch.Tensor
    ind: torch.Tensor
    aug: torch.Tensor
    int_: torch.Tensor
    total: torch.Tensor

    @property
    def as_dict(self) -> dict[str, float]:
        return {
            N.LOSS_CLS: float(self.cls),
            N.LOSS_IND: float(self.ind),
            N.LOSS_AUG: float(self.aug),
            N.LOSS_INT: float(self.int_),
            N.LOSS_TOTAL: float(self.total),
        }

    @property
    def is_finite(self) -> bool:
        return all(bool(torch.isfinite(t).all()) for t in (self.cls, self.ind, self.aug, self.int_, self.total))


def total_loss(cls: torch.Tensor, ind: torch.Tensor, aug: torch.Tensor, int_: torch.Tensor, weights: LossWeights) -> LossBundle:
    total = cls + weights.alpha1 * ind + weights.alpha2 * aug + weights.alpha3 * int_
    return LossBundle(cls=cls, ind=ind, aug=aug, int_=int_, total=total)
