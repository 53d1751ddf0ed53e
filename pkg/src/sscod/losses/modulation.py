"""Angular modulation of positive and negative logits.

Scalar forms take angles; the vectorized helpers take cosines and also
return the derivative with respect to the cosine, which the losses chain
through.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

__all__ = [
    "NegativeKind",
    "arcface_modulation",
    "curriculum_modulation",
    "classify_negative",
    "focal_gamma",
]

_MIN_SINE = 1e-12


class NegativeKind(str, Enum):
    HARD = "hard"
    SEMI_HARD = "semi_hard"
    EASY = "easy"


def arcface_modulation(theta_pos: float, theta_neg: float, m: float) -> tuple[float, float]:
    return math.cos(theta_pos + m), math.cos(theta_neg)


def curriculum_modulation(
    theta_pos: float, theta_neg: float, m: float, t: float
) -> tuple[float, float]:
    """Margin on the positive; easy negatives untouched, the others are
    reweighted by ``t + cos(theta_neg)``."""
    T = math.cos(theta_pos + m)
    c = math.cos(theta_neg)
    if theta_pos + m <= theta_neg:
        return T, c
    return T, c * (t + c)


def classify_negative(theta_pos: float, theta_neg: float, m: float) -> NegativeKind:
    if theta_neg < theta_pos:
        return NegativeKind.HARD
    if theta_neg < theta_pos + m:
        return NegativeKind.SEMI_HARD
    return NegativeKind.EASY


def focal_gamma(t: float) -> float:
    return -math.log(max(t, 1e-5))


def angles(c):
    return np.arccos(np.clip(c, -1.0, 1.0))


def margin_positive(c, m: float):
    """``cos(arccos(c) + m)`` and its derivative in ``c``.

    Written as ``c cos m - sin(theta) sin m`` so that ``m = 0`` returns ``c``
    bit for bit. No monotonic correction is applied past ``theta + m > pi``.
    """
    c = np.asarray(c, dtype=np.float64)
    if m == 0.0:
        return c.copy(), np.ones_like(c)
    cos_m, sin_m = math.cos(m), math.sin(m)
    sine = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    T = c * cos_m - sine * sin_m
    dT = cos_m + c * sin_m / np.maximum(sine, _MIN_SINE)
    return T, dT


def curriculum_negative(c_neg, theta_pos, m: float, t: float):
    """Curriculum negative logit and its derivative in ``c_neg``.

    ``theta_pos`` broadcasts against ``c_neg``; the easy/hard boundary uses
    each positive's own angle.
    """
    c_neg = np.asarray(c_neg, dtype=np.float64)
    easy = theta_pos + m <= angles(c_neg)
    N = np.where(easy, c_neg, c_neg * (t + c_neg))
    dN = np.where(easy, 1.0, t + 2.0 * c_neg)
    return N, dN
