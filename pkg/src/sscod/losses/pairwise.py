"""Pair-wise metric losses over a labeled batch.

Every loss is a function of the cosine matrix of the normalized batch, so
each computes ``dL/dC`` and shares one backward pass through the Gram
matrix and the row normalization.
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
    update_t,
)
from .modulation import angles, curriculum_negative, margin_positive

__all__ = [
    "PairSets",
    "PairwiseParams",
    "DENOMINATOR_MODES",
    "DISTANCES",
    "build_pair_sets",
    "triplet_loss",
    "npair_loss",
    "supcon_loss",
    "mod_supcon_loss",
    "curcon_update_t",
    "anchor_min_positive_cosines",
]

DENOMINATOR_MODES = ("all_others", "negatives_only")
DISTANCES = ("cosine", "euclidean")
_PAIR_MODULATIONS = ("none", "arcface", "curriculum")


@dataclass(frozen=True)
class PairSets:
    """Per-anchor positive (``U_i``) and negative (``V_i``) index sets."""

    positives: tuple
    negatives: tuple

    @property
    def n_positive(self) -> tuple:
        return tuple(len(u) for u in self.positives)

    @property
    def n_negative(self) -> tuple:
        return tuple(len(v) for v in self.negatives)


@dataclass(frozen=True)
class PairwiseParams:
    """``scale`` is the inverse temperature ``1 / tau``.

    ``denominator_mode="all_others"`` sums over every ``k != i`` (ArcCon and
    CurCon); ``"negatives_only"`` sums over negatives only (ArcCon-Neg).
    """

    scale: float = 1.0
    margin: float = 0.5
    denominator_mode: str = "all_others"
    modulation: str = "arcface"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")
        if not self.margin >= 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")
        if self.denominator_mode not in DENOMINATOR_MODES:
            raise ValueError(
                f"unknown denominator_mode {self.denominator_mode!r}; expected one of {DENOMINATOR_MODES}"
            )
        if self.modulation not in _PAIR_MODULATIONS:
            raise ValueError(
                f"unknown modulation {self.modulation!r}; expected one of {_PAIR_MODULATIONS}"
            )


def build_pair_sets(labels) -> PairSets:
    labels = list(np.asarray(labels).ravel())
    n = len(labels)
    if n < 2:
        raise ValueError(f"need at least 2 samples to form pairs, got {n}")
    positives = tuple(
        tuple(j for j in range(n) if j != i and labels[j] == labels[i]) for i in range(n)
    )
    negatives = tuple(tuple(j for j in range(n) if labels[j] != labels[i]) for i in range(n))
    return PairSets(positives, negatives)


def _masks(y):
    same = y[:, None] == y[None, :]
    pos = same & ~np.eye(len(y), dtype=bool)
    return pos, ~same


def _prepare(X, y):
    X, y = check_batch(X, y)
    if X.shape[0] < 2:
        raise ValueError("pair-wise losses need at least 2 samples")
    Xn, norms = l2_normalize(X, axis=1)
    C = gram(Xn, Xn)
    pos, neg = _masks(y)
    return Xn, norms, C, pos, neg


def _backward(dC, Xn, norms):
    gXn = dC @ Xn + dC.T @ Xn
    return l2_normalize_backward(gXn, Xn, norms, axis=1)


def _distance(C, distance):
    """Pair distance on unit vectors and its derivative in the cosine."""
    if distance == "cosine":
        return -C, -1.0
    if distance == "euclidean":
        return 2.0 - 2.0 * C, -2.0
    raise ValueError(f"unknown distance {distance!r}; expected one of {DISTANCES}")


def triplet_loss(X, y, margin: float = 0.5, distance: str = "cosine") -> LossValueGrad:
    """Batch-hard triplet loss.

    For each anchor, hinge on ``margin + max positive distance - min
    negative distance``. Anchors missing positives or negatives are
    skipped; the mean is over the remaining anchors.
    """
    Xn, norms, C, pos, neg = _prepare(X, y)
    D, dD = _distance(C, distance)
    anchors = np.flatnonzero(pos.any(axis=1) & neg.any(axis=1))
    if anchors.size == 0:
        raise ValueError("no anchor has both a positive and a negative")

    hardest_pos = np.argmax(np.where(pos, D, -np.inf), axis=1)
    hardest_neg = np.argmin(np.where(neg, D, np.inf), axis=1)
    rows = anchors
    hinge = margin + D[rows, hardest_pos[rows]] - D[rows, hardest_neg[rows]]
    per_anchor = np.maximum(hinge, 0.0)
    A = anchors.size
    value = float(csum(per_anchor) / A)

    dC = np.zeros_like(C)
    active = hinge > 0.0
    np.add.at(dC, (rows[active], hardest_pos[rows[active]]), dD / A)
    np.add.at(dC, (rows[active], hardest_neg[rows[active]]), -dD / A)
    return LossValueGrad(value, _backward(dC, Xn, norms))


def npair_loss(X, y, distance: str = "cosine", scale: float = 1.0) -> LossValueGrad:
    """Multi-class N-pair loss, ``log(1 + sum_k exp(s * (d+ - d_k)))``.

    Every anchor must have exactly one positive and at least one negative.
    """
    Xn, norms, C, pos, neg = _prepare(X, y)
    n_pos = pos.sum(axis=1)
    if np.any(n_pos != 1):
        bad = int(np.flatnonzero(n_pos != 1)[0])
        raise ValueError(f"N-pair loss needs exactly one positive per anchor; anchor {bad} has {n_pos[bad]}")
    if not np.all(neg.any(axis=1)):
        raise ValueError("N-pair loss needs at least one negative per anchor")
    D, dD = _distance(C, distance)
    N = C.shape[0]
    j = np.argmax(pos, axis=1)
    d_pos = D[np.arange(N), j]
    terms = scale * (d_pos[:, None] - D)
    u = log_sum_exp_axis(terms, axis=1, where=neg)
    per_anchor = np.logaddexp(0.0, u)
    value = float(csum(per_anchor) / N)

    sig = 0.5 * (1.0 + np.tanh(0.5 * u))
    soft = np.where(neg, np.exp(terms - u[:, None]), 0.0)
    dterms = (sig / N)[:, None] * soft
    # d(term_k)/dD_ik = -s, d(term_k)/dD_ij = +s
    dDmat = -scale * dterms
    dDmat[np.arange(N), j] += scale * dterms.sum(axis=1)
    return LossValueGrad(value, _backward(dDmat * dD, Xn, norms))


def supcon_loss(X, y, scale: float = 1.0) -> LossValueGrad:
    """Supervised contrastive loss in cosine form.

    ``F_i = -1/|U_i| sum_{j in U_i} log(exp(s c_ij) / sum_{k != i} exp(s c_ik))``.
    Anchors without positives are skipped.
    """
    Xn, norms, C, pos, neg = _prepare(X, y)
    N = C.shape[0]
    anchors = pos.any(axis=1)
    A = int(anchors.sum())
    if A == 0:
        raise ValueError("no anchor has a positive")
    others = ~np.eye(N, dtype=bool)
    Z = scale * C
    lse = log_sum_exp_axis(Z, axis=1, where=others)
    n_pos = np.maximum(pos.sum(axis=1), 1)
    mean_pos = csum(np.where(pos, C, 0.0), axis=1) / n_pos
    per_anchor = lse - scale * mean_pos
    value = float(csum(per_anchor[anchors]) / A)

    soft = np.where(others, np.exp(Z - lse[:, None]), 0.0)
    dC = scale * (soft - pos / n_pos[:, None])
    dC *= anchors[:, None] / A
    return LossValueGrad(value, _backward(dC, Xn, norms))


def mod_supcon_loss(
    X, y, params: PairwiseParams = PairwiseParams(), state: Optional[CurriculumState] = None
) -> LossValueGrad:
    """Modulated supervised contrastive loss.

    For anchor ``i`` and positive ``j`` the numerator logit is
    ``s * T(theta_ij)`` and the denominator adds ``s * N(theta_ik)`` over
    negatives ``k``. With ``denominator_mode="all_others"`` the remaining
    positives of ``i`` also enter the denominator, unmodulated, as
    ``s * cos(theta_ik)``; this makes ``arcface`` with ``m = 0`` coincide
    with :func:`supcon_loss`.

    ``modulation="curriculum"`` reads ``state.t`` (held constant for the
    gradient) and decides easy vs hard per (i, j, k) from ``theta_ij``.
    Anchors without positives are skipped.
    """
    if params.modulation == "curriculum" and state is None:
        raise ValueError("curriculum modulation requires a CurriculumState")
    Xn, norms, C, pos, neg = _prepare(X, y)
    N = C.shape[0]
    anchors = pos.any(axis=1)
    A = int(anchors.sum())
    if A == 0:
        raise ValueError("no anchor has a positive")
    s, m = params.scale, params.margin
    idx = np.arange(N)

    if params.modulation == "none":
        T, dT = C, np.ones_like(C)
    else:
        T, dT = margin_positive(C, m)
    C_k = np.broadcast_to(C[:, None, :], (N, N, N))
    if params.modulation == "curriculum":
        Nk, dNk = curriculum_negative(C_k, angles(C)[:, :, None], m, state.t)
    else:
        Nk, dNk = C_k, np.ones((N, N, N))

    # (i, j, k): anchor i, positive j, denominator term k
    neg_k = neg[:, None, :]
    Z = np.where(neg_k, s * Nk, s * C_k)
    Z[:, idx, idx] = s * T
    D = np.where(neg_k, s * dNk, s)
    D[:, idx, idx] = s * dT

    self_term = np.zeros((N, N, N), dtype=bool)
    self_term[:, idx, idx] = True
    M = self_term | neg_k
    if params.denominator_mode == "all_others":
        M = M | pos[:, None, :]
    M &= pos[:, :, None]

    lse = log_sum_exp_axis(Z, axis=2, where=M)
    lse = np.where(pos, lse, 0.0)
    nll = np.where(pos, lse - s * T, 0.0)
    n_pos = np.maximum(pos.sum(axis=1), 1)
    per_anchor = csum(nll, axis=1) / n_pos
    value = float(csum(per_anchor[anchors]) / A)

    w = pos / (n_pos[:, None] * A)
    dZ = np.where(M, np.exp(np.where(M, Z, 0.0) - lse[:, :, None]), 0.0)
    dZ[:, idx, idx] -= pos
    dZ *= w[:, :, None]
    dC = np.sum(dZ * D, axis=1)
    return LossValueGrad(value, _backward(dC, Xn, norms))


def anchor_min_positive_cosines(X, y) -> np.ndarray:
    """For each anchor with positives, its smallest positive cosine."""
    _, _, C, pos, _ = _prepare(X, y)
    anchors = pos.any(axis=1)
    return np.min(np.where(pos, C, np.inf), axis=1)[anchors]


def curcon_update_t(X, y, state: CurriculumState) -> CurriculumState:
    """EMA update of ``t`` towards the mean per-anchor minimum positive cosine."""
    mins = anchor_min_positive_cosines(X, y)
    if mins.size == 0:
        raise ValueError("no anchor has a positive")
    return update_t(mins, state)
