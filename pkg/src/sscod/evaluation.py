"""Common-object pair evaluation.

Cross-image pairs are scored, the top-K kept, and each kept pair is
labeled true or false positive against ground-truth box pairs. Recall,
precision and VOC-style AP follow from the flags in score order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .detection import Detection, ScoredPair, combined_score, cosine, detection_score, pair_similarity
from .geometry import BBox, UndefinedOverlapError, iou

__all__ = [
    "GroundTruthBox",
    "ClassProbBox",
    "EvalConfig",
    "EvalResult",
    "ImagePairCase",
    "enumerate_top_pairs",
    "match_to_ground_truth",
    "classify_pairs",
    "recall_precision",
    "average_precision",
    "evaluate_flags",
    "hard_match",
    "soft_match",
    "rank_pairs",
    "evaluate_cases",
]

SCORE_FORMS = ("weighted_cosine", "combined_sqrt")
# continuous (all-point) interpolation, as in VOC 2010 and later
AP_INTERPOLATION = "continuous"


@dataclass(frozen=True)
class GroundTruthBox:
    box: BBox
    category: int


@dataclass(frozen=True)
class ClassProbBox:
    """Box with per-category scores from a conventional detector."""

    box: BBox
    probs: tuple

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probs must be a non-empty vector")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("each probability must be in [0, 1]")
        if p.sum() > 1.0 + 1e-9:
            raise ValueError(f"probabilities sum to {p.sum()} > 1")
        object.__setattr__(self, "probs", tuple(float(v) for v in p))


@dataclass(frozen=True)
class EvalConfig:
    top_k: int = 100
    iou_threshold: float = 0.5
    similarity_threshold: Optional[float] = None
    score_form: str = "weighted_cosine"

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        if not 0.0 < self.iou_threshold < 1.0:
            raise ValueError(f"iou_threshold must be in (0, 1), got {self.iou_threshold}")
        if self.score_form not in SCORE_FORMS:
            raise ValueError(f"unknown score_form {self.score_form!r}; expected one of {SCORE_FORMS}")


@dataclass(frozen=True)
class EvalResult:
    recall: float
    precision: float
    average_precision: float
    tp_flags: tuple = field(default=())

    @property
    def n_true_positive(self) -> int:
        return sum(self.tp_flags)


def rank_pairs(pairs: Sequence[ScoredPair], cfg: EvalConfig) -> list[ScoredPair]:
    """Sort by descending score, ties by (index_a, index_b), then truncate."""
    if cfg.similarity_threshold is not None:
        pairs = [p for p in pairs if p.score > cfg.similarity_threshold]
    ranked = sorted(pairs, key=lambda p: (-p.score, p.index_a, p.index_b))
    return ranked[: cfg.top_k]


def enumerate_top_pairs(
    dets_a: Sequence[Detection], dets_b: Sequence[Detection], cfg: EvalConfig = EvalConfig()
) -> list[ScoredPair]:
    pairs = []
    for ia, da in enumerate(dets_a):
        for ib, db in enumerate(dets_b):
            if cfg.score_form == "weighted_cosine":
                score = pair_similarity(da, db)
            else:
                score = combined_score(
                    detection_score(da), detection_score(db), cosine(da.embedding, db.embedding)
                )
            pairs.append(ScoredPair(ia, ib, score))
    return rank_pairs(pairs, cfg)


def hard_match(
    dets_a: Sequence[ClassProbBox], dets_b: Sequence[ClassProbBox], cfg: EvalConfig = EvalConfig()
) -> list[ScoredPair]:
    """Pair boxes whose arg-max categories agree, scored by the product of
    their top probabilities."""
    _check_category_count(dets_a, dets_b)
    best_a = [(int(np.argmax(d.probs)), max(d.probs)) for d in dets_a]
    best_b = [(int(np.argmax(d.probs)), max(d.probs)) for d in dets_b]
    pairs = [
        ScoredPair(ia, ib, pa * pb)
        for ia, (ca, pa) in enumerate(best_a)
        for ib, (cb, pb) in enumerate(best_b)
        if ca == cb
    ]
    return rank_pairs(pairs, cfg)


def soft_match(
    dets_a: Sequence[ClassProbBox], dets_b: Sequence[ClassProbBox], cfg: EvalConfig = EvalConfig()
) -> list[ScoredPair]:
    """Score every pair by the cosine of the probability vectors."""
    _check_category_count(dets_a, dets_b)

    def unit(d):
        p = np.asarray(d.probs)
        norm = np.linalg.norm(p)
        if norm == 0.0:
            raise ValueError("soft matching needs nonzero probability vectors")
        return p / norm

    ua = [unit(d) for d in dets_a]
    ub = [unit(d) for d in dets_b]
    pairs = [
        ScoredPair(ia, ib, float(np.clip(np.dot(va, vb), -1.0, 1.0)))
        for ia, va in enumerate(ua)
        for ib, vb in enumerate(ub)
    ]
    return rank_pairs(pairs, cfg)


def _check_category_count(dets_a, dets_b):
    sizes = {len(d.probs) for d in list(dets_a) + list(dets_b)}
    if len(sizes) > 1:
        raise ValueError(f"inconsistent category counts: {sorted(sizes)}")


def _box(obj) -> BBox:
    return obj if isinstance(obj, BBox) else obj.box


def _safe_iou(a: BBox, b: BBox) -> float:
    try:
        return iou(a, b)
    except UndefinedOverlapError:
        return 0.0


def match_to_ground_truth(box: BBox, gts: Sequence[GroundTruthBox], iou_threshold: float) -> Optional[int]:
    """Index of the highest-IoU ground-truth box above threshold (ties go
    to the lowest index), or None."""
    best, best_iou = None, iou_threshold
    for g, gt in enumerate(gts):
        v = _safe_iou(box, gt.box)
        if v > best_iou:
            best, best_iou = g, v
    return best


def classify_pairs(
    pairs: Sequence[ScoredPair],
    dets_a,
    dets_b,
    gts_a: Sequence[GroundTruthBox],
    gts_b: Sequence[GroundTruthBox],
    cfg: EvalConfig = EvalConfig(),
    gt_pairs: Optional[Sequence[tuple[int, int]]] = None,
) -> list[bool]:
    """True/false positive flag for each pair, in the given (score) order.

    A pair is a true positive when both boxes match a ground-truth box, the
    two matched boxes share a category, the matched ground-truth pair
    belongs to ``gt_pairs`` (default: every equal-category cross pair), and
    no earlier pair already claimed it.
    """
    if gt_pairs is None:
        universe = {
            (ga, gb)
            for ga, a in enumerate(gts_a)
            for gb, b in enumerate(gts_b)
            if a.category == b.category
        }
    else:
        universe = set(map(tuple, gt_pairs))
    match_a = [match_to_ground_truth(_box(d), gts_a, cfg.iou_threshold) for d in dets_a]
    match_b = [match_to_ground_truth(_box(d), gts_b, cfg.iou_threshold) for d in dets_b]
    consumed = set()
    flags = []
    for p in pairs:
        ga, gb = match_a[p.index_a], match_b[p.index_b]
        ok = (
            ga is not None
            and gb is not None
            and gts_a[ga].category == gts_b[gb].category
            and (ga, gb) in universe
            and (ga, gb) not in consumed
        )
        if ok:
            consumed.add((ga, gb))
        flags.append(ok)
    return flags


def recall_precision(tp_flags: Sequence[bool], n_gt_pairs: int) -> tuple[float, float]:
    tp = sum(bool(f) for f in tp_flags)
    recall = tp / n_gt_pairs if n_gt_pairs > 0 else 0.0
    precision = tp / len(tp_flags) if len(tp_flags) > 0 else 0.0
    return recall, precision


def average_precision(tp_flags: Sequence[bool], n_gt_pairs: int) -> float:
    """Area under the precision envelope of the PR curve.

    Computed in exact rational arithmetic and rounded once, so the result
    is correctly rounded and independent of summation order.
    """
    if n_gt_pairs <= 0 or len(tp_flags) == 0:
        return 0.0
    # recall rises by 1/n at each TP rank and nowhere else; each TP rank also
    # beats the FP ranks sharing its recall, so only TP ranks shape the envelope
    precisions, tp = [], 0
    for rank, flag in enumerate(tp_flags, start=1):
        if flag:
            tp += 1
            precisions.append(Fraction(tp, rank))
    area, envelope = Fraction(0), Fraction(0)
    for precision in reversed(precisions):
        envelope = max(envelope, precision)
        area += envelope
    return float(area / n_gt_pairs)


def evaluate_flags(tp_flags: Sequence[bool], n_gt_pairs: int) -> EvalResult:
    recall, precision = recall_precision(tp_flags, n_gt_pairs)
    return EvalResult(recall, precision, average_precision(tp_flags, n_gt_pairs), tuple(bool(f) for f in tp_flags))


@dataclass(frozen=True)
class ImagePairCase:
    """Everything needed to evaluate one image pair."""

    dets_a: tuple
    dets_b: tuple
    gts_a: tuple
    gts_b: tuple
    gt_pairs: tuple


def _score_case(case: ImagePairCase, mode: str, cfg: EvalConfig, thresholds):
    if not case.dets_a or not case.dets_b:
        pairs = []
    elif mode == "sscod":
        pairs = enumerate_top_pairs(case.dets_a, case.dets_b, cfg)
    elif mode == "hard_match":
        pairs = hard_match(case.dets_a, case.dets_b, cfg)
    elif mode == "soft_match":
        pairs = soft_match(case.dets_a, case.dets_b, cfg)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    flags = {}
    for thr in thresholds:
        tcfg = EvalConfig(cfg.top_k, thr, cfg.similarity_threshold, cfg.score_form)
        flags[thr] = classify_pairs(pairs, case.dets_a, case.dets_b, case.gts_a, case.gts_b, tcfg, case.gt_pairs)
    return [p.score for p in pairs], flags


def evaluate_cases(
    cases: Sequence[ImagePairCase],
    mode: str = "sscod",
    cfg: EvalConfig = EvalConfig(),
    thresholds: Sequence[float] = (0.5, 0.6, 0.7),
    jobs: int = 1,
) -> dict:
    """Evaluate many image pairs and pool them.

    Pairs from all cases are merged in descending score order, ties broken
    by case index then rank within the case, before computing AP. Results do
    not depend on ``jobs``.
    """
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(lambda c: _score_case(c, mode, cfg, thresholds), cases))
    else:
        outcomes = [_score_case(c, mode, cfg, thresholds) for c in cases]
    n_gt = sum(len(c.gt_pairs) for c in cases)
    order = sorted(
        ((-score, ci, rank) for ci, (scores, _) in enumerate(outcomes) for rank, score in enumerate(scores))
    )
    results = {}
    for thr in thresholds:
        merged = [outcomes[ci][1][thr][rank] for _, ci, rank in order]
        results[thr] = evaluate_flags(merged, n_gt)
    return results
