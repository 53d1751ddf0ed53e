import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import classwise_reference
from sscod.losses import (
    ClasswiseParams,
    CurriculumState,
    NegativeKind,
    arcface_modulation,
    classify_negative,
    classwise_loss,
    curriculum_modulation,
    focal_curriculum_loss,
    focal_gamma,
    positive_cosines,
    update_t,
)

E2 = np.array([[1.0, 0.0], [0.0, 1.0]])


def instance(seed, N=12, d=6, n=4):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(N, d)), rng.permutation(np.arange(N) % n), rng.normal(size=(d, n))


# modulation scalars

def test_arcface_modulation_examples():
    T, _ = arcface_modulation(0.0, 1.0, 0.5)
    assert T == pytest.approx(0.877583, abs=1e-6)
    assert arcface_modulation(0.7, 1.0, 0.0)[0] == math.cos(0.7)
    assert arcface_modulation(0.2, math.pi / 2, 0.5)[1] == pytest.approx(0.0, abs=1e-16)


def test_curriculum_modulation_examples():
    tp, m = 0.3, 0.5
    _, N = curriculum_modulation(tp, tp + m + 0.1, m, 0.7)
    assert N == math.cos(tp + m + 0.1)
    _, N = curriculum_modulation(0.8, 0.5, m, 0.0)
    assert N == pytest.approx(math.cos(0.5) ** 2, abs=1e-15)
    assert curriculum_modulation(0.3, 0.0, m, 0.5)[1] == 1.5


@pytest.mark.parametrize(
    "neg, kind", [(0.2, NegativeKind.HARD), (0.6, NegativeKind.SEMI_HARD), (0.9, NegativeKind.EASY)]
)
def test_classify_negative(neg, kind):
    assert classify_negative(0.3, neg, 0.5) is kind


def test_focal_gamma():
    assert focal_gamma(1.0) == 0.0
    assert focal_gamma(1e-5) == pytest.approx(-math.log(1e-5), abs=1e-12)
    assert focal_gamma(1e-9) == focal_gamma(1e-5)


# update_t

def test_update_t_examples():
    assert update_t([0.5, 0.7], CurriculumState()).t == pytest.approx(0.006, abs=1e-15)
    assert update_t([0.2, 0.5], CurriculumState(0.9, ema_decay=0.0)).t == pytest.approx(0.35, abs=1e-15)
    s = CurriculumState()
    for _ in range(5000):
        s = update_t([1.0, 1.0], s)
    assert s.t == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        update_t([], CurriculumState())


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=20), st.floats(0, 1), st.floats(0.01, 0.99))
def test_update_t_stays_in_unit_interval(cos, t, decay):
    assert 0.0 <= update_t(cos, CurriculumState(t, decay)).t <= 1.0


# loss values

def test_spot_values():
    X = np.array([[1.0, 0.0]])
    y = np.array([0])
    W = np.array([[1.0, -1.0], [0.0, 0.0]])
    v1 = classwise_loss(X, y, W, ClasswiseParams(1.0, 0.5)).value
    assert v1 == pytest.approx(math.log1p(math.exp(-2)), abs=1e-12)
    v4 = classwise_loss(X, y, W, ClasswiseParams(4.0, 0.5)).value
    assert v4 == pytest.approx(math.log1p(math.exp(-8)), abs=1e-12)
    assert v4 == pytest.approx(3.3540e-4, rel=1e-4)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_symmetric_logits_give_log_n(n):
    # a point orthogonal to every class center
    W = np.zeros((n + 1, n))
    W[:n, :] = np.eye(n)
    X = np.zeros((1, n + 1))
    X[0, n] = 1.0
    assert classwise_loss(X, [0], W).value == pytest.approx(math.log(n), abs=1e-12)


def test_focal_contribution_examples():
    # orthogonal point, m=0: both logits 0, p = 0.5, negative is easy
    X = np.array([[0.0, 0.0, 1.0]])
    W = E2.copy()
    W = np.vstack([W, [0.0, 0.0]])
    p0 = ClasswiseParams(1.0, 0.0)
    assert focal_curriculum_loss(X, [0], W, p0, CurriculumState(1.0)).value == pytest.approx(math.log(2), abs=1e-12)
    half = focal_curriculum_loss(X, [0], W, p0, CurriculumState(math.exp(-1))).value
    assert half == pytest.approx(0.5 * math.log(2), abs=1e-12)
    # near-perfect prediction contributes almost nothing
    Xp = np.array([[1.0, 0.0, 0.0]])
    v = focal_curriculum_loss(Xp, [0], W, ClasswiseParams(60.0, 0.0), CurriculumState(0.3)).value
    assert 0.0 <= v < 1e-20


@pytest.mark.parametrize("modulation", ["none", "arcface", "curriculum"])
@pytest.mark.parametrize("seed", range(5))
def test_matches_scalar_oracle(modulation, seed):
    X, y, W = instance(seed)
    params = ClasswiseParams(4.0, 0.5)
    state = CurriculumState(0.4)
    got = classwise_loss(X, y, W, params, modulation, state).value
    ref = classwise_reference(X.tolist(), y.tolist(), W.tolist(), 4.0, 0.5, modulation, 0.4)
    assert got == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_focal_matches_scalar_oracle(seed):
    X, y, W = instance(seed)
    got = focal_curriculum_loss(X, y, W, ClasswiseParams(), CurriculumState(0.3)).value
    ref = classwise_reference(X.tolist(), y.tolist(), W.tolist(), 4.0, 0.5, "curriculum", 0.3, focal=True)
    assert got == pytest.approx(ref, abs=1e-12)


def test_plain_softmax_equals_literal_scaled_form():
    X, y, W = instance(3)
    Xn = X / np.linalg.norm(X, axis=1, keepdims=True)
    Wn = W / np.linalg.norm(W, axis=0, keepdims=True)
    s = 4.0
    logits = s * (Xn @ Wn)
    literal = -np.mean(logits[np.arange(len(y)), y] - np.log(np.exp(logits).sum(axis=1)))
    assert classwise_loss(Xn, y, Wn, ClasswiseParams(s, 0.5)).value == pytest.approx(literal, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_reductions(seed):
    X, y, W = instance(seed)
    p0 = ClasswiseParams(4.0, 0.0)
    assert abs(classwise_loss(X, y, W, p0, "arcface").value - classwise_loss(X, y, W, p0).value) <= 1e-12
    st1 = CurriculumState(1.0)
    p = ClasswiseParams()
    focal = focal_curriculum_loss(X, y, W, p, st1)
    cur = classwise_loss(X, y, W, p, "curriculum", st1)
    assert abs(focal.value - cur.value) <= 1e-12
    assert np.max(np.abs(focal.grad_points - cur.grad_points)) <= 1e-12


@pytest.mark.parametrize("modulation", ["none", "arcface", "curriculum", "focal"])
def test_permutation_invariance_exact(modulation):
    X, y, W = instance(7, N=16)
    state = CurriculumState(0.5)

    def f(Xp, yp):
        if modulation == "focal":
            return focal_curriculum_loss(Xp, yp, W, ClasswiseParams(), state)
        return classwise_loss(Xp, yp, W, ClasswiseParams(), modulation, state)

    base = f(X, y)
    for k in range(3):
        perm = np.random.default_rng(k).permutation(len(y))
        r = f(X[perm], y[perm])
        assert r.value == base.value
        assert np.array_equal(r.grad_points, base.grad_points[perm])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 0.6))
def test_margin_never_decreases_loss(seed, m):
    X, y, W = instance(seed)
    theta = np.arccos(np.clip(positive_cosines(X, y, W), -1, 1))
    if np.any(theta + m > math.pi):
        return
    base = classwise_loss(X, y, W, ClasswiseParams(4.0, 0.0), "arcface").value
    assert classwise_loss(X, y, W, ClasswiseParams(4.0, m), "arcface").value >= base


def test_input_errors():
    X, y, W = instance(0)
    with pytest.raises(ValueError):
        classwise_loss(X, y, W[:, :1])
    bad = y.copy()
    bad[0] = 9
    with pytest.raises(ValueError):
        classwise_loss(X, bad, W)
    with pytest.raises(ValueError):
        classwise_loss(X, y, W, modulation="curriculum")
    with pytest.raises(ValueError):
        classwise_loss(X, y, W, modulation="cosface")
