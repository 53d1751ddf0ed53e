"""Desk-scale gradient descent on free embedding parameters.

Synthetic clusters on the unit sphere are optimized directly under any
loss in the registry, which is enough to check that a loss pulls classes
together and pushes them apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .losses.base import CurriculumState
from .losses.registry import LossConfig, advance_state, evaluate_loss
from .numerics import Rng

__all__ = [
    "SyntheticSpec",
    "TrainConfig",
    "TraceRow",
    "TrainResult",
    "TrainingDiverged",
    "EmbeddingMetrics",
    "generate_synthetic",
    "train",
    "embedding_metrics",
    "MetricEmbedding",
]


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int = 3
    points_per_class: int = 20
    dim: int = 8
    cluster_spread: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.points_per_class < 1:
            raise ValueError("points_per_class must be >= 1")
        if self.cluster_spread < 0:
            raise ValueError("cluster_spread must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    loss: LossConfig = field(default_factory=LossConfig)
    steps: int = 500
    learning_rate: float = 0.1
    log_every: int = 10
    seed: int = 0  # class-weight initialization

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")


@dataclass(frozen=True)
class TraceRow:
    step: int
    loss: float
    t: Optional[float]
    intra: Optional[float]
    inter: Optional[float]


@dataclass
class TrainResult:
    points: np.ndarray
    weights: Optional[np.ndarray]
    trace: list
    state: Optional[CurriculumState]

    def t_at(self, step: int) -> Optional[float]:
        for row in self.trace:
            if row.step == step:
                return row.t
        raise KeyError(f"step {step} was not logged")


@dataclass(frozen=True)
class EmbeddingMetrics:
    mean_intra_cosine: Optional[float]
    mean_inter_cosine: Optional[float]
    center_cosines: np.ndarray

    @property
    def gap(self) -> Optional[float]:
        if self.mean_intra_cosine is None or self.mean_inter_cosine is None:
            return None
        return self.mean_intra_cosine - self.mean_inter_cosine


def generate_synthetic(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm points around seeded random unit centers, class-major order."""
    rng = Rng(spec.seed)
    centers = rng.normal_array((spec.n_classes, spec.dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    points = np.empty((spec.n_classes * spec.points_per_class, spec.dim))
    row = 0
    for c in range(spec.n_classes):
        for _ in range(spec.points_per_class):
            p = centers[c] + spec.cluster_spread * rng.normal_array(spec.dim)
            points[row] = p / np.linalg.norm(p)
            row += 1
    labels = np.repeat(np.arange(spec.n_classes), spec.points_per_class)
    return points, labels


def embedding_metrics(X, y, n_classes: Optional[int] = None) -> EmbeddingMetrics:
    """Mean same-label cosine, mean cross-label cosine, and cosines between
    per-class mean directions. Means over empty pair sets are ``None``."""
    X, y = check_X_y(X, y, dtype=np.float64, ensure_min_features=2)
    classes = np.unique(y)
    if n_classes is not None:
        missing = sorted(set(range(n_classes)) - set(classes.tolist()))
        if missing:
            raise ValueError(f"classes without points: {missing}")
        classes = np.arange(n_classes)
    if classes.size < 2:
        raise ValueError("embedding_metrics needs at least 2 classes")
    Xn = X / np.linalg.norm(X, axis=1, keepdims=True)
    C = Xn @ Xn.T
    same = y[:, None] == y[None, :]
    off_diag = ~np.eye(len(y), dtype=bool)
    intra_mask, inter_mask = same & off_diag, ~same
    intra = float(C[intra_mask].mean()) if intra_mask.any() else None
    inter = float(C[inter_mask].mean()) if inter_mask.any() else None
    centers = np.stack([Xn[y == c].mean(axis=0) for c in classes])
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    return EmbeddingMetrics(intra, inter, centers @ centers.T)


def _init_weights(cfg: TrainConfig, dim: int, n_classes: int) -> np.ndarray:
    return Rng(cfg.seed).normal_array((dim, n_classes))


def train(X, y, cfg: TrainConfig = TrainConfig(), W=None) -> TrainResult:
    """Full-batch gradient descent on raw points (and class weights for
    class-wise losses).

    Each step evaluates the loss with the current curriculum state, takes
    the gradient step, then advances the state from the cosines of the
    evaluated (pre-step) parameters. Trace rows are logged every
    ``log_every`` steps with the loss evaluated in that step and the state
    and metrics after it.
    """
    X = np.array(X, dtype=np.float64)
    y = np.asarray(y)
    lcfg = cfg.loss
    if lcfg.family == "classwise":
        n_classes = int(y.max()) + 1
        W = _init_weights(cfg, X.shape[1], n_classes) if W is None else np.array(W, dtype=np.float64)
    else:
        W = None
    state = lcfg.initial_state()
    trace = []
    lr = cfg.learning_rate
    for step in range(1, cfg.steps + 1):
        res = evaluate_loss(lcfg, X, y, W, state)
        if not math.isfinite(res.value):
            raise TrainingDiverged(f"non-finite loss {res.value} at step {step} ({lcfg.name})")
        new_state = advance_state(lcfg, X, y, W, state)
        X = X - lr * res.grad_points
        if W is not None:
            W = W - lr * res.grad_weights
        if not (np.all(np.isfinite(X)) and (W is None or np.all(np.isfinite(W)))):
            raise TrainingDiverged(f"non-finite parameters after step {step} ({lcfg.name}, lr={lr})")
        state = new_state
        if step % cfg.log_every == 0:
            m = embedding_metrics(X, y)
            trace.append(
                TraceRow(step, res.value, None if state is None else state.t, m.mean_intra_cosine, m.mean_inter_cosine)
            )
    return TrainResult(X, W, trace, state)


class MetricEmbedding(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Learn unit embeddings for a labeled point set under a metric loss.

    ``fit`` runs :func:`train` on the given points, treating them as free
    parameters. After fitting, ``embedding_`` holds the optimized unit
    vectors and ``class_centers_`` one unit direction per class (the
    learned weight columns for class-wise losses, the normalized class
    means otherwise). ``transform`` maps new points to their cosines with
    the class centers and ``predict`` returns the closest class.

    Parameters
    ----------
    loss : str
        Any name in ``sscod.losses.registry.LOSS_NAMES``.
    scale : float or None
        ``None`` uses 4 for class-wise losses and 1 for pair-wise losses.
    margin : float
    distance : {"cosine", "euclidean"}
        Only used by ``triplet`` and ``npair``.
    ema_decay : float
    steps, learning_rate, log_every : gradient descent settings.
    random_state : int
        Seed for class-weight initialization.
    """

    def __init__(
        self,
        loss="curcon",
        scale=None,
        margin=0.5,
        distance="cosine",
        ema_decay=0.99,
        steps=500,
        learning_rate=0.1,
        log_every=10,
        random_state=0,
    ):
        self.loss = loss
        self.scale = scale
        self.margin = margin
        self.distance = distance
        self.ema_decay = ema_decay
        self.steps = steps
        self.learning_rate = learning_rate
        self.log_every = log_every
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        lcfg = LossConfig(self.loss, self.scale, self.margin, self.distance, self.ema_decay)
        return TrainConfig(lcfg, self.steps, self.learning_rate, self.log_every, self.random_state)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, ensure_min_features=2)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("MetricEmbedding needs at least 2 classes")
        cfg = self._train_config()
        result = train(X, y_idx, cfg)
        self.embedding_ = result.points / np.linalg.norm(result.points, axis=1, keepdims=True)
        if result.weights is not None:
            centers = result.weights.T
        else:
            centers = np.stack([self.embedding_[y_idx == k].mean(axis=0) for k in range(self.classes_.size)])
        self.class_centers_ = centers / np.linalg.norm(centers, axis=1, keepdims=True)
        self.trace_ = result.trace
        self.curriculum_t_ = None if result.state is None else result.state.t
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "class_centers_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        Xn = X / np.linalg.norm(X, axis=1, keepdims=True)
        return Xn @ self.class_centers_.T

    def predict(self, X):
        return self.classes_[np.argmax(self.transform(X), axis=1)]
