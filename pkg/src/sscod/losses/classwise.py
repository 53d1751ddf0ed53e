"""Class-wise softmax losses over normalized embeddings and class centers.

Points ``X`` are ``(N, d)`` rows and weights ``W`` are ``(d, n)`` columns;
both are raw parameters and are normalized inside the loss, so gradients
are returned with respect to the raw values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..numerics import log_sum_exp_axis
from .base import (
    CurriculumState,
    LossValueGrad,
    check_batch,
    csum,
    gram,
    l2_normalize,
    l2_normalize_backward,
)
from .modulation import angles, curriculum_negative, focal_gamma, margin_positive

__all__ = [
    "ClasswiseParams",
    "MODULATIONS",
    "classwise_loss",
    "focal_curriculum_loss",
    "positive_cosines",
]

MODULATIONS = ("none", "arcface", "curriculum")


@dataclass(frozen=True)
class ClasswiseParams:
    scale: float = 4.0
    margin: float = 0.5

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")
        if not self.margin >= 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")


def _check_inputs(X, y, W):
    X, y = check_batch(X, y)
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != X.shape[1]:
        raise ValueError(f"weights must be (d, n) with d={X.shape[1]}, got {W.shape}")
    n = W.shape[1]
    if n < 2:
        raise ValueError(f"need at least 2 classes, got {n}")
    if y.min() < 0 or y.max() >= n:
        raise ValueError(f"labels must lie in [0, {n}), got range [{y.min()}, {y.max()}]")
    return X, y, W


def positive_cosines(X, y, W) -> np.ndarray:
    """Cosine between each point and its own class center."""
    X, y, W = _check_inputs(X, y, W)
    Xn, _ = l2_normalize(X, axis=1)
    Wn, _ = l2_normalize(W, axis=0)
    return np.sum(Xn * Wn[:, y].T, axis=1)


def _forward(X, y, W, params, modulation, state, focal):
    if modulation not in MODULATIONS:
        raise ValueError(f"unknown modulation {modulation!r}; expected one of {MODULATIONS}")
    if modulation == "curriculum" and state is None:
        raise ValueError("curriculum modulation requires a CurriculumState")
    X, y, W = _check_inputs(X, y, W)
    N = X.shape[0]
    s, m = params.scale, params.margin
    rows = np.arange(N)

    Xn, xnorm = l2_normalize(X, axis=1)
    Wn, wnorm = l2_normalize(W, axis=0)
    C = gram(Xn, Wn.T)
    onehot = np.zeros_like(C, dtype=bool)
    onehot[rows, y] = True

    # logits and d(logit)/d(cosine)
    Z = s * C
    D = np.full_like(C, s)
    if modulation != "none":
        T, dT = margin_positive(C[rows, y], m)
        if modulation == "curriculum":
            theta_pos = angles(C[rows, y])[:, None]
            Nn, dN = curriculum_negative(C, theta_pos, m, state.t)
            Z = s * Nn
            D = s * dN
        Z[rows, y] = s * T
        D[rows, y] = s * dT

    lse = log_sum_exp_axis(Z, axis=1)
    nll = lse - Z[rows, y]
    dnll_dZ = np.exp(Z - lse[:, None]) - onehot

    if focal:
        gamma = focal_gamma(state.t)
        one_minus_p = -np.expm1(-nll)
        if gamma == 0.0:
            per_sample = nll.copy()
            weight = np.ones(N)
        else:
            focal_term = one_minus_p**gamma
            per_sample = focal_term * nll
            p = np.exp(-nll)
            weight = focal_term + gamma * nll * p * one_minus_p ** (gamma - 1.0)
            # one_minus_p == 0 only when nll == 0; the limit of the second term is 0
            weight = np.where(one_minus_p > 0.0, weight, focal_term)
    else:
        per_sample = nll
        weight = np.ones(N)

    value = float(csum(per_sample) / N)
    dC = (weight[:, None] / N) * dnll_dZ * D
    gXn = dC @ Wn.T
    gWn = Xn.T @ dC
    gX = l2_normalize_backward(gXn, Xn, xnorm, axis=1)
    gW = l2_normalize_backward(gWn, Wn, wnorm, axis=0)
    return LossValueGrad(value, gX, gW)


def classwise_loss(
    X,
    y,
    W,
    params: ClasswiseParams = ClasswiseParams(),
    modulation: str = "none",
    state: Optional[CurriculumState] = None,
) -> LossValueGrad:
    """Mean scaled-softmax loss with optional angular modulation.

    Parameters
    ----------
    X : array of shape (N, d)
        Embedding points, not necessarily unit norm.
    y : array of shape (N,)
        Class indices in ``[0, n)``.
    W : array of shape (d, n)
        Class centers as columns, not necessarily unit norm.
    params : ClasswiseParams
        Scale ``s`` and angular margin ``m``.
    modulation : {"none", "arcface", "curriculum"}
        ``arcface`` adds the margin to the positive angle; ``curriculum``
        does the same and reweights hard and semi-hard negatives by
        ``t + cos(theta)`` using ``state.t``.
    state : CurriculumState, optional
        Required for ``curriculum``. Read only; ``t`` is treated as a
        constant for the gradient.
    """
    return _forward(X, y, W, params, modulation, state, focal=False)


def focal_curriculum_loss(
    X, y, W, params: ClasswiseParams = ClasswiseParams(), state: CurriculumState = None
) -> LossValueGrad:
    """Curriculum-modulated softmax with a focal factor ``(1 - p)^gamma(t)``.

    ``gamma(t) = -log(max(t, 1e-5))`` is held fixed for the gradient.
    """
    if state is None:
        raise ValueError("focal_curriculum_loss requires a CurriculumState")
    return _forward(X, y, W, params, "curriculum", state, focal=True)
