import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sscod.detection import (
    Detection,
    Embedding,
    combined_score,
    cosine,
    detection_score,
    pair_similarity,
)
from sscod.geometry import BBox

BOX = BBox(0, 0, 1, 1)
vectors = arrays(np.float64, 5, elements=st.floats(-10, 10, allow_nan=False)).filter(
    lambda v: np.linalg.norm(v) > 1e-3
)
unit = st.floats(0, 1)


def det(po=1.0, pc=1.0, emb=(1.0, 0.0)):
    return Detection(BOX, po, pc, Embedding(emb))


@pytest.mark.parametrize("po, pc, expected", [(0.8, 0.5, 0.4), (1, 1, 1.0), (0, 0.7, 0.0)])
def test_detection_score(po, pc, expected):
    assert detection_score(det(po, pc)) == pytest.approx(expected, abs=1e-15)


def test_detection_validation():
    with pytest.raises(ValueError):
        det(1.2, 0.5)
    with pytest.raises(ValueError):
        det(0.5, -0.1)
    with pytest.raises(ValueError):
        Embedding([0.0, 0.0])
    with pytest.raises(ValueError):
        Embedding([])


def test_cosine_examples():
    x = Embedding([3.0, 4.0])
    assert cosine(x, x) == 1.0
    assert cosine(x, Embedding([-3.0, -4.0])) == -1.0
    h = math.sqrt(2) / 2
    assert cosine(Embedding([1, 0]), Embedding([h, h])) == pytest.approx(h, abs=1e-15)
    with pytest.raises(ValueError):
        cosine(Embedding([1, 0]), Embedding([1, 0, 0]))


def test_pair_similarity_examples():
    assert pair_similarity(det(), det()) == 1.0
    assert pair_similarity(det(), det(emb=(-1.0, 0.0))) == -1.0
    c60 = (0.5, math.sqrt(3) / 2)
    assert pair_similarity(det(0.8, 0.5), det(0.5, 1.0, c60)) == pytest.approx(0.1, abs=1e-15)


@pytest.mark.parametrize("p1, p2, sim, expected", [(1, 1, 0.25, 0.5), (1, 1, -0.3, 0.0), (1, 1, 0.0, 0.0), (0.5, 0.5, 1, 0.25)])
def test_combined_score(p1, p2, sim, expected):
    assert combined_score(p1, p2, sim) == expected


@given(vectors)
def test_embedding_unit_and_idempotent(v):
    e = Embedding(v)
    assert abs(np.linalg.norm(e.values) - 1.0) <= 1e-9
    assert np.max(np.abs(Embedding(e.values).values - e.values)) <= 1e-12
    with pytest.raises(ValueError):
        e.values[0] = 1.0


@given(vectors, vectors, unit, unit, unit, unit)
def test_pair_similarity_symmetric_and_bounded(u, v, a1, a2, b1, b2):
    da = Detection(BOX, a1, a2, Embedding(u))
    db = Detection(BOX, b1, b2, Embedding(v))
    assert pair_similarity(da, db) == pair_similarity(db, da)
    assert abs(pair_similarity(da, db)) <= detection_score(da) * detection_score(db)
