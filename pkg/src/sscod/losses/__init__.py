"""Class-wise and pair-wise metric-learning losses with analytic gradients."""

from .base import CurriculumState, LossValueGrad, update_t
from .classwise import ClasswiseParams, classwise_loss, focal_curriculum_loss, positive_cosines
from .modulation import (
    NegativeKind,
    arcface_modulation,
    classify_negative,
    curriculum_modulation,
    focal_gamma,
)
from .pairwise import (
    PairSets,
    PairwiseParams,
    anchor_min_positive_cosines,
    build_pair_sets,
    curcon_update_t,
    mod_supcon_loss,
    npair_loss,
    supcon_loss,
    triplet_loss,
)

__all__ = [
    "ClasswiseParams",
    "CurriculumState",
    "LossValueGrad",
    "NegativeKind",
    "PairSets",
    "PairwiseParams",
    "anchor_min_positive_cosines",
    "arcface_modulation",
    "build_pair_sets",
    "classify_negative",
    "classwise_loss",
    "curcon_update_t",
    "curriculum_modulation",
    "focal_curriculum_loss",
    "focal_gamma",
    "mod_supcon_loss",
    "npair_loss",
    "positive_cosines",
    "supcon_loss",
    "triplet_loss",
    "update_t",
]
