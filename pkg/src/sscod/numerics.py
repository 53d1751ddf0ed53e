"""Numerical helpers: stable log-sum-exp, a finite-difference gradient
oracle, and a portable SplitMix64 generator used everywhere randomness is
needed."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Rng",
    "GradientReport",
    "log_sum_exp",
    "log_sum_exp_axis",
    "finite_difference_gradient",
    "check_gradient",
]

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class Rng:
    """SplitMix64 pseudo-random generator.

    Every draw is derived from 64-bit integer arithmetic only, so a given
    seed yields the same integer stream on any platform. Floating point
    draws use the top 53 bits.
    """

    def __init__(self, seed: int = 0):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN_GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError(f"randbelow needs n >= 1, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def choice(self, items: Sequence):
        if len(items) == 0:
            raise IndexError("cannot choose from an empty sequence")
        return items[self.randbelow(len(items))]

    def normal(self) -> float:
        """Standard normal draw (Box-Muller, cosine branch only)."""
        u1 = 1.0 - self.random()
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normal_array(self, shape) -> np.ndarray:
        size = int(np.prod(shape))
        return np.array([self.normal() for _ in range(size)], dtype=np.float64).reshape(shape)

    def shuffle(self, items: list) -> list:
        """In-place Fisher-Yates shuffle; returns ``items``."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
        return items

    def sample(self, items: Sequence, k: int) -> list:
        """``k`` items drawn uniformly without replacement.

        Partial Fisher-Yates over a copy; when ``k >= len(items)`` the whole
        sequence is returned in its original order.
        """
        pool = list(items)
        if k >= len(pool):
            return pool
        for i in range(k):
            j = i + self.randbelow(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


def log_sum_exp(values) -> float:
    """log(sum(exp(values))) with max-shift."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("log_sum_exp of an empty sequence")
    if v.size == 1:
        return float(v[0])
    vmax = v.max()
    if not np.isfinite(vmax):
        return float(vmax)
    return float(vmax + np.log(np.sum(np.exp(v - vmax))))


def log_sum_exp_axis(Z, axis: int = -1, where=None) -> np.ndarray:
    """Vectorized log-sum-exp along ``axis``, optionally over a mask.

    Terms are summed in sorted order, so permuting them along ``axis``
    leaves the result bit-identical. Reductions with no unmasked term
    return ``-inf``.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if where is not None:
        Z = np.where(where, Z, -np.inf)
    zmax = np.max(Z, axis=axis, keepdims=True)
    safe_max = np.where(np.isfinite(zmax), zmax, 0.0)
    terms = np.exp(Z - safe_max)
    total = np.sum(np.sort(terms, axis=axis), axis=axis, keepdims=True)
    with np.errstate(divide="ignore"):
        out = safe_max + np.log(total)
    return np.squeeze(out, axis=axis)


def finite_difference_gradient(
    f: Callable[[np.ndarray], float], x, h: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x`` (any shape)."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        f_plus = f(x)
        flat[k] = orig - h
        f_minus = f(x)
        flat[k] = orig
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise FloatingPointError(f"non-finite function value at coordinate {k}")
        gflat[k] = (f_plus - f_minus) / (2.0 * h)
    return grad


@dataclass(frozen=True)
class GradientReport:
    max_rel_error: float
    worst_index: tuple
    rel_tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.rel_tol


def check_gradient(analytic, numeric, rel_tol: float = 1e-5) -> GradientReport:
    """Compare two gradient blocks coordinate-wise.

    The relative error is ``|a - n| / max(1e-8, |a| + |n|)``.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.shape != n.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {n.shape}")
    if a.size == 0:
        return GradientReport(0.0, (), rel_tol)
    rel = np.abs(a - n) / np.maximum(1e-8, np.abs(a) + np.abs(n))
    worst = np.unravel_index(int(np.argmax(rel)), rel.shape)
    return GradientReport(float(rel[worst]), tuple(int(i) for i in worst), rel_tol)
