"""Shared plumbing for the loss family: result container, curriculum state,
input validation and differentiable L2 normalization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.utils import check_array, check_X_y

__all__ = ["LossValueGrad", "CurriculumState", "update_t", "check_batch"]


@dataclass(frozen=True)
class LossValueGrad:
    value: float
    grad_points: np.ndarray
    grad_weights: Optional[np.ndarray] = None


@dataclass(frozen=True)
class CurriculumState:
    """EMA-tracked curriculum scalar ``t``, kept in [0, 1]."""

    t: float = 0.0
    ema_decay: float = 0.99

    def __post_init__(self):
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError(f"ema_decay must be in [0, 1), got {self.ema_decay}")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must be in [0, 1], got {self.t}")


def update_t(batch_positive_cosines, state: CurriculumState) -> CurriculumState:
    """One EMA step towards the batch mean of the positive cosines.

    ``t' = (1 - decay) * mean + decay * t``, clamped to [0, 1].
    """
    r = np.asarray(batch_positive_cosines, dtype=np.float64).ravel()
    if r.size == 0:
        raise ValueError("update_t needs at least one positive cosine")
    mean = float(np.sum(np.sort(r)) / r.size)
    t = (1.0 - state.ema_decay) * mean + state.ema_decay * state.t
    return CurriculumState(t=min(1.0, max(0.0, t)), ema_decay=state.ema_decay)


def check_batch(X, y):
    """Validate an embedding batch: float64 ``(N, d)`` points, ``d >= 2``."""
    X, y = check_X_y(X, y, dtype=np.float64, ensure_min_features=2, y_numeric=True)
    y = np.asarray(y)
    if not np.all(y == np.round(y)):
        raise ValueError("labels must be integers")
    return X, y.astype(np.int64)


def check_points(X):
    return check_array(X, dtype=np.float64, ensure_min_features=2)


def csum(a, axis=None):
    """Sum in sorted order so the result does not depend on input order."""
    a = np.asarray(a)
    if axis is None:
        return np.sum(np.sort(a, axis=None))
    return np.sum(np.sort(a, axis=axis), axis=axis)


def l2_normalize(A, axis):
    """Unit vectors along ``axis`` and the norms, safe from over/underflow."""
    peak = np.max(np.abs(A), axis=axis, keepdims=True)
    if np.any(peak == 0.0):
        raise ValueError("cannot normalize a zero vector")
    S = A / peak
    scaled = np.sqrt(np.sum(S * S, axis=axis, keepdims=True))
    return S / scaled, peak * scaled


def l2_normalize_backward(grad_unit, unit, norms, axis):
    """Pull a gradient w.r.t. ``A / ||A||`` back to ``A``."""
    radial = np.sum(grad_unit * unit, axis=axis, keepdims=True)
    return (grad_unit - radial * unit) / norms


def gram(U, V):
    """Cosine matrix between rows of ``U`` and rows of ``V``.

    Each entry is reduced independently of its position in the batch.
    """
    return np.sum(U[:, None, :] * V[None, :, :], axis=-1)
