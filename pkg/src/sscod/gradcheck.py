"""Finite-difference verification of every analytic loss gradient."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .losses.registry import LOSS_NAMES, LossConfig, evaluate_loss, random_instance
from .numerics import Rng, check_gradient, finite_difference_gradient

__all__ = ["GradcheckResult", "gradcheck_loss", "run_gradcheck"]


@dataclass(frozen=True)
class GradcheckResult:
    loss: str
    max_rel_error: float
    rel_tol: float
    n_instances: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.rel_tol


def gradcheck_loss(
    cfg: LossConfig,
    n_instances: int = 20,
    seed: int = 0,
    h: float = 1e-5,
    rel_tol: float = 1e-5,
    n_points: int = 16,
    dim: int = 8,
    n_classes: int = 4,
    corrupt: bool = False,
) -> GradcheckResult:
    """Worst relative error over ``n_instances`` instances seeded
    ``seed, seed + 1, ...``. ``corrupt`` perturbs the analytic gradient and
    exists to exercise the failure path."""
    worst = 0.0
    for k in range(n_instances):
        X, y, W, state = random_instance(Rng(seed + k), n_points, dim, n_classes, cfg.name)
        if cfg.family != "classwise":
            W = None
        res = evaluate_loss(cfg, X, y, W, state)
        gX = res.grad_points
        if corrupt:
            gX = gX * 1.01 + 1e-3
        num = finite_difference_gradient(lambda Z: evaluate_loss(cfg, Z, y, W, state).value, X, h)
        worst = max(worst, check_gradient(gX, num, rel_tol).max_rel_error)
        if W is not None:
            numW = finite_difference_gradient(lambda V: evaluate_loss(cfg, X, y, V, state).value, W, h)
            worst = max(worst, check_gradient(res.grad_weights, numW, rel_tol).max_rel_error)
    return GradcheckResult(cfg.name, worst, rel_tol, n_instances)


def run_gradcheck(
    names: Optional[Iterable[str]] = None, base: Optional[LossConfig] = None, **kwargs
) -> list[GradcheckResult]:
    names = LOSS_NAMES if names is None else tuple(names)
    base = base or LossConfig()
    return [gradcheck_loss(base.with_(name=name), **kwargs) for name in names]
