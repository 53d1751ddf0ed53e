import math

import pytest
from hypothesis import assume, given, settings, strategies as st

from evalfixtures import brute_force, random_fixture
from sscod.detection import Detection, Embedding, ScoredPair
from sscod.evaluation import (
    ClassProbBox,
    EvalConfig,
    GroundTruthBox,
    ImagePairCase,
    average_precision,
    classify_pairs,
    enumerate_top_pairs,
    evaluate_cases,
    evaluate_flags,
    hard_match,
    recall_precision,
    soft_match,
)
from sscod.geometry import BBox
from sscod.numerics import Rng


def det(x, y, emb=(1.0, 0.0), po=1.0, pc=1.0):
    return Detection(BBox(x, y, 2, 2), po, pc, Embedding(emb))


def gt(x, y, cat):
    return GroundTruthBox(BBox(x, y, 2, 2), cat)


def prob(x, *p):
    return ClassProbBox(BBox(x, 0, 2, 2), p)


# ranking

def test_enumerate_top_pairs_examples():
    assert len(enumerate_top_pairs([det(0, 0)], [det(0, 0)], EvalConfig(top_k=1))) == 1
    a = [det(0, 0, (1, i)) for i in range(5)]
    b = [det(0, 0, (i, 1)) for i in range(5)]
    pairs = enumerate_top_pairs(a, b)
    assert len(pairs) == 25
    assert all(p.score >= q.score for p, q in zip(pairs, pairs[1:]))
    same = enumerate_top_pairs([det(0, 0)] * 3, [det(0, 0)] * 2)
    assert [(p.index_a, p.index_b) for p in same] == [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]
    assert enumerate_top_pairs([], [det(0, 0)]) == []


def test_score_forms():
    a, b = det(0, 0, (1, 0), 0.5, 1.0), det(0, 0, (0.6, 0.8), 1.0, 0.5)
    assert enumerate_top_pairs([a], [b])[0].score == pytest.approx(0.25 * 0.6, abs=1e-15)
    root = enumerate_top_pairs([a], [b], EvalConfig(score_form="combined_sqrt"))[0].score
    assert root == pytest.approx(0.25 * math.sqrt(0.6), abs=1e-15)
    with pytest.raises(ValueError):
        EvalConfig(score_form="max")
    with pytest.raises(ValueError):
        EvalConfig(top_k=0)
    with pytest.raises(ValueError):
        EvalConfig(iou_threshold=1.0)


def test_similarity_threshold_filters():
    a = [det(0, 0, (1, 0)), det(0, 0, (0, 1))]
    pairs = enumerate_top_pairs(a, [det(0, 0, (1, 0))], EvalConfig(similarity_threshold=0.5))
    assert [(p.index_a, p.index_b) for p in pairs] == [(0, 0)]


def _continuous_dets(rng, n):
    return [
        Detection(BBox(0, 0, 1, 1), rng.random(), rng.random(), Embedding(rng.normal_array(4) + 1e-3))
        for _ in range(n)
    ]


@settings(deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 1.0))
def test_objectness_scaling_keeps_ranking(seed, factor):
    rng = Rng(seed)
    dets_a, dets_b = _continuous_dets(rng, 5), _continuous_dets(rng, 5)
    pairs = enumerate_top_pairs(dets_a, dets_b)
    scores = sorted(p.score for p in pairs)
    # scores closer than rounding could be reordered by the scaling
    assume(all(v - u > 1e-12 * max(abs(u), abs(v)) for u, v in zip(scores, scores[1:])))
    scaled = [Detection(d.box, d.objectness * factor, d.centeredness, d.embedding) for d in dets_a]
    order = [(p.index_a, p.index_b) for p in pairs]
    assert order == [(p.index_a, p.index_b) for p in enumerate_top_pairs(scaled, dets_b)]


# classification

def test_classify_examples():
    gts_a, gts_b = [gt(0, 0, 1), gt(10, 0, 2)], [gt(0, 0, 1), gt(10, 0, 2)]
    da, db = [det(0, 0), det(10, 0)], [det(0, 0), det(10, 0)]
    cfg = EvalConfig()
    assert classify_pairs([ScoredPair(0, 0, 1.0)], da, db, gts_a, gts_b, cfg) == [True]
    assert classify_pairs([ScoredPair(0, 1, 1.0)], da, db, gts_a, gts_b, cfg) == [False]
    twice = [ScoredPair(0, 0, 1.0), ScoredPair(0, 0, 1.0)]
    assert classify_pairs(twice, da, db, gts_a, gts_b, cfg) == [True, False]
    # restricting the universe to the sampled GT pairs
    assert classify_pairs([ScoredPair(1, 1, 1.0)], da, db, gts_a, gts_b, cfg, gt_pairs=[(0, 0)]) == [False]
    # a box overlapping nothing
    assert classify_pairs([ScoredPair(0, 0, 1.0)], [det(50, 50)], db, gts_a, gts_b, cfg) == [False]


def test_box_matches_highest_iou_then_lowest_index():
    gts = [gt(1, 0, 0), gt(0, 0, 1), gt(0, 0, 2)]
    d = [det(0, 0)]
    other = [gt(0, 0, 1)]
    # IoU 1 with GT 1 and GT 2; tie goes to GT 1 (category 1)
    assert classify_pairs([ScoredPair(0, 0, 1.0)], d, [det(0, 0)], gts, other) == [True]


def test_recall_precision_examples():
    assert recall_precision([True, True, False], 2) == (1.0, 2 / 3)
    assert recall_precision([], 3) == (0.0, 0.0)
    assert recall_precision([True, True], 2) == (1.0, 1.0)
    assert recall_precision([True], 0) == (0.0, 1.0)


def test_average_precision_examples():
    assert average_precision([True], 1) == 1.0
    assert average_precision([False, True], 1) == 0.5
    assert average_precision([False, False], 3) == 0.0
    assert average_precision([], 3) == 0.0
    assert average_precision([True, False, True], 4) == pytest.approx((1 + 2 / 3) / 4, abs=1e-15)


@given(st.lists(st.booleans(), max_size=30), st.integers(0, 40))
def test_metrics_in_unit_interval(flags, extra):
    n = sum(flags) + extra
    r = evaluate_flags(flags, n)
    for v in (r.recall, r.precision, r.average_precision):
        assert 0.0 <= v <= 1.0
    assert r.average_precision <= r.recall + 1e-15


# baselines

def test_hard_match_examples():
    assert hard_match([prob(0, 0.9, 0.1)], [prob(0, 0.1, 0.9)]) == []
    pairs = hard_match([prob(0, 0.0, 0.05, 0.05, 0.9)], [prob(0, 0.1, 0.0, 0.1, 0.8)])
    assert pairs[0].score == pytest.approx(0.72, abs=1e-15)
    uni = hard_match([prob(0, 0.25, 0.25), prob(3, 0.5, 0.5)], [prob(0, 0.3, 0.3)])
    assert len(uni) == 2
    with pytest.raises(ValueError):
        hard_match([prob(0, 0.5, 0.5)], [prob(0, 0.3, 0.3, 0.3)])


def test_soft_match_examples():
    assert soft_match([prob(0, 0.2, 0.3)], [prob(0, 0.2, 0.3)])[0].score == pytest.approx(1.0, abs=1e-15)
    assert soft_match([prob(0, 1.0, 0.0)], [prob(0, 0.0, 1.0)])[0].score == 0.0
    s = soft_match([prob(0, 0.6, 0.4)], [prob(0, 0.4, 0.6)])[0].score
    assert s == pytest.approx(0.48 / 0.52, abs=1e-15)
    assert s == pytest.approx(0.923, abs=5e-4)
    with pytest.raises(ValueError):
        soft_match([prob(0, 0.0, 0.0)], [prob(0, 0.5, 0.5)])
    with pytest.raises(ValueError):
        ClassProbBox(BBox(0, 0, 1, 1), (0.7, 0.6))


def test_soft_and_hard_agree_on_one_hot():
    a = [prob(0, 1, 0, 0), prob(10, 0, 1, 0)]
    b = [prob(10, 0, 1, 0), prob(0, 1, 0, 0), prob(20, 0, 0, 1)]
    gts_a, gts_b = [gt(0, 0, 0), gt(10, 0, 1)], [gt(10, 0, 1), gt(0, 0, 0), gt(20, 0, 2)]
    cfg = EvalConfig()
    hard = hard_match(a, b, cfg)
    soft = [p for p in soft_match(a, b, cfg) if p.score > 0]
    tp = lambda pairs: {(p.index_a, p.index_b) for p, f in zip(pairs, classify_pairs(pairs, a, b, gts_a, gts_b, cfg)) if f}
    assert tp(hard) == tp(soft) == {(0, 1), (1, 0)}


# oracle equivalence

@pytest.mark.parametrize("seed", range(60))
def test_matches_brute_force(seed):
    dets_a, dets_b, gts_a, gts_b, gt_pairs, cfg = random_fixture(seed)
    pairs = enumerate_top_pairs(dets_a, dets_b, cfg)
    flags = classify_pairs(pairs, dets_a, dets_b, gts_a, gts_b, cfg, gt_pairs)
    ranked, ref_flags, recall, precision, ap, n = brute_force(dets_a, dets_b, gts_a, gts_b, gt_pairs, cfg)
    assert [(p.index_a, p.index_b) for p in pairs] == ranked
    assert flags == ref_flags
    res = evaluate_flags(flags, n)
    assert (res.recall, res.precision, res.average_precision) == (recall, precision, ap)


# pooled evaluation

def _cases(n):
    out = []
    for seed in range(n):
        da, db, ga, gb, gp, _ = random_fixture(seed)
        if gp is None:
            gp = [(i, j) for i in range(len(ga)) for j in range(len(gb)) if ga[i].category == gb[j].category]
        out.append(ImagePairCase(tuple(da), tuple(db), tuple(ga), tuple(gb), tuple(gp)))
    return out


def test_evaluate_cases_jobs_independent():
    cases = _cases(30)
    serial = evaluate_cases(cases, "sscod", EvalConfig(top_k=5))
    threaded = evaluate_cases(cases, "sscod", EvalConfig(top_k=5), jobs=4)
    assert serial == threaded
    assert set(serial) == {0.5, 0.6, 0.7}


def test_evaluate_cases_single_case_matches_direct():
    case = _cases(1)[0]
    res = evaluate_cases([case], "sscod", EvalConfig(), thresholds=(0.5,))[0.5]
    pairs = enumerate_top_pairs(case.dets_a, case.dets_b)
    flags = classify_pairs(pairs, case.dets_a, case.dets_b, case.gts_a, case.gts_b, EvalConfig(), case.gt_pairs)
    assert res == evaluate_flags(flags, len(case.gt_pairs))


def test_evaluate_cases_empty_and_bad_mode():
    res = evaluate_cases([], "sscod")
    assert all(r.recall == r.precision == r.average_precision == 0.0 for r in res.values())
    with pytest.raises(ValueError):
        evaluate_cases(_cases(1), "nearest")
