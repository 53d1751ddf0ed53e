"""Name-based access to every loss, used by the trainer, gradient checks
and the command line."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .base import CurriculumState, LossValueGrad, update_t
from .classwise import ClasswiseParams, classwise_loss, focal_curriculum_loss, positive_cosines
from .pairwise import PairwiseParams, curcon_update_t, mod_supcon_loss, npair_loss, supcon_loss, triplet_loss

__all__ = ["LOSS_NAMES", "LossConfig", "evaluate_loss", "advance_state"]

# name -> (family, uses curriculum state)
_LOSSES = {
    "softmax": ("classwise", False),
    "arcface": ("classwise", False),
    "curriculum": ("classwise", True),
    "focalcur": ("classwise", True),
    "triplet": ("pairwise", False),
    "npair": ("pairwise", False),
    "supcon": ("pairwise", False),
    "arccon": ("pairwise", False),
    "arccon_neg": ("pairwise", False),
    "curcon": ("pairwise", True),
}
LOSS_NAMES = tuple(_LOSSES)


@dataclass(frozen=True)
class LossConfig:
    """Loss selector plus hyperparameters.

    ``scale=None`` picks the family default: 4 for class-wise, 1 for
    pair-wise. ``distance`` applies to ``triplet`` and ``npair``.
    """

    name: str = "curcon"
    scale: Optional[float] = None
    margin: float = 0.5
    distance: str = "cosine"
    ema_decay: float = 0.99

    def __post_init__(self):
        if self.name not in _LOSSES:
            raise ValueError(f"unknown loss {self.name!r}; expected one of {LOSS_NAMES}")

    @property
    def family(self) -> str:
        return _LOSSES[self.name][0]

    @property
    def uses_state(self) -> bool:
        return _LOSSES[self.name][1]

    @property
    def resolved_scale(self) -> float:
        if self.scale is not None:
            return float(self.scale)
        return 4.0 if self.family == "classwise" else 1.0

    def with_(self, **changes) -> "LossConfig":
        return replace(self, **changes)

    def initial_state(self) -> Optional[CurriculumState]:
        return CurriculumState(0.0, self.ema_decay) if self.uses_state else None


def evaluate_loss(
    cfg: LossConfig, X, y, W=None, state: Optional[CurriculumState] = None
) -> LossValueGrad:
    name, s, m = cfg.name, cfg.resolved_scale, cfg.margin
    if cfg.family == "classwise":
        if W is None:
            raise ValueError(f"class-wise loss {name!r} needs class weights")
        params = ClasswiseParams(scale=s, margin=m)
        if name == "focalcur":
            return focal_curriculum_loss(X, y, W, params, state)
        modulation = {"softmax": "none", "arcface": "arcface", "curriculum": "curriculum"}[name]
        return classwise_loss(X, y, W, params, modulation, state)
    if name == "triplet":
        return triplet_loss(X, y, margin=m, distance=cfg.distance)
    if name == "npair":
        return npair_loss(X, y, distance=cfg.distance, scale=s)
    if name == "supcon":
        return supcon_loss(X, y, scale=s)
    params = {
        "arccon": PairwiseParams(s, m, "all_others", "arcface"),
        "arccon_neg": PairwiseParams(s, m, "negatives_only", "arcface"),
        "curcon": PairwiseParams(s, m, "all_others", "curriculum"),
    }[name]
    return mod_supcon_loss(X, y, params, state)


def advance_state(cfg: LossConfig, X, y, W, state: Optional[CurriculumState]):
    """Curriculum EMA step for losses that carry a state; identity otherwise."""
    if state is None or not cfg.uses_state:
        return state
    if cfg.family == "classwise":
        return update_t(positive_cosines(X, y, W), state)
    return curcon_update_t(X, y, state)


def random_instance(rng, n_points: int = 16, dim: int = 8, n_classes: int = 4, loss: str = "softmax"):
    """Seeded random gradient-check instance ``(X, y, W, state)``.

    Labels are balanced then shuffled; ``npair`` instead gets exactly two
    points per label so every anchor has a single positive.
    """
    X = rng.normal_array((n_points, dim))
    W = rng.normal_array((dim, n_classes))
    if loss == "npair":
        labels = [i // 2 for i in range(n_points)]
    else:
        labels = [i % n_classes for i in range(n_points)]
    rng.shuffle(labels)
    t = 0.05 + 0.95 * rng.random()
    return X, np.array(labels), W, CurriculumState(t=t)
