"""Detection tuples and the scores used to rank cross-image pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BBox

__all__ = [
    "Embedding",
    "Detection",
    "ScoredPair",
    "detection_score",
    "cosine",
    "pair_similarity",
    "combined_score",
]


class Embedding:
    """Unit-norm embedding vector. The constructor normalizes its input."""

    __slots__ = ("values",)

    def __init__(self, values):
        v = np.array(values, dtype=np.float64).ravel()
        norm = float(np.linalg.norm(v))
        if v.size == 0 or norm == 0.0 or not math.isfinite(norm):
            raise ValueError("embedding must be a non-empty vector with finite, nonzero norm")
        self.values = v / norm
        self.values.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.values.size

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"Embedding({self.values.tolist()!r})"


@dataclass(frozen=True)
class Detection:
    box: BBox
    objectness: float
    centeredness: float
    embedding: Embedding = field(repr=False)

    def __post_init__(self):
        for name in ("objectness", "centeredness"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    @property
    def score(self) -> float:
        return detection_score(self)


@dataclass(frozen=True)
class ScoredPair:
    index_a: int
    index_b: int
    score: float


def detection_score(d: Detection) -> float:
    """Objectness times centeredness."""
    return d.objectness * d.centeredness


def cosine(a: Embedding, b: Embedding) -> float:
    if a.dim != b.dim:
        raise ValueError(f"embedding dimension mismatch: {a.dim} vs {b.dim}")
    c = float(np.dot(a.values, b.values))
    return min(1.0, max(-1.0, c))


def pair_similarity(a: Detection, b: Detection) -> float:
    """Score-weighted cosine ``s_a * s_b * cos(x_a, x_b)``."""
    return detection_score(a) * detection_score(b) * cosine(a.embedding, b.embedding)


def combined_score(p1: float, p2: float, sim: float) -> float:
    """``p1 * p2 * sqrt(sim)`` with negative similarity clamped to zero."""
    return p1 * p2 * math.sqrt(max(sim, 0.0))
