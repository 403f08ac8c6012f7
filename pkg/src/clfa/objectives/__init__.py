from .losses import (
    PROB_FLOOR,
    LossBundle,
    clamped_log,
    cross_entropy_from_probs,
    kl_uniform,
    kl_divergence,
    classification_loss,
    loss_cls,
    loss_ind,
    loss_aug,
    intervention_pairs,
    loss_int,
    total_loss,
)
from .gradcheck import GradientEntry, FiniteDifferenceReport, finite_difference_check
