import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from founderfit.errors import InputOutOfRange
from founderfit.scoring import EvaluationScores, aggregate, aggregate_array, formula_edge

unit = st.floats(0.0, 1.0, allow_nan=False)
positive_unit = st.floats(1e-12, 1.0, allow_nan=False)


def test_worked_examples():
    assert aggregate(0.71, 0.6625, 0.63) == pytest.approx(0.66, abs=0.005)
    assert aggregate(0.78, 0.68, 0.75) == pytest.approx(0.78, abs=0.005)
    assert aggregate(0.85, 0.0, 0.34) == 0.0


def test_closed_form():
    f, i, t = 0.4, 0.5, 0.8
    assert aggregate(f, i, t) == pytest.approx(f ** (1 / (2 * i * t)), rel=1e-12)


@pytest.mark.parametrize("args", [(0, 0.5, 0.5), (0.5, 0, 0.5), (0.5, 0.5, 0), (0, 0, 0), (0, 1, 1)])
def test_zero_input_gives_zero(args):
    assert aggregate(*args) == 0.0


def test_perfect_founder():
    assert aggregate(1.0, 0.01, 0.01) == 1.0
    assert formula_edge(1.0, 0.01, 0.01)
    assert not formula_edge(1.0, 0.0, 0.5)
    assert not formula_edge(0.9, 0.01, 0.01)


@pytest.mark.parametrize("bad", [-0.01, 1.01, math.nan, math.inf])
def test_out_of_range(bad):
    with pytest.raises(InputOutOfRange):
        aggregate(bad, 0.5, 0.5)
    with pytest.raises(InputOutOfRange):
        aggregate(0.5, bad, 0.5)
    with pytest.raises(InputOutOfRange):
        aggregate_array([0.5], [0.5], [bad])


def test_tiny_product_is_finite():
    for p in (1e-15, 1e-200, 1e-310, 5e-324):
        v = aggregate(0.999999, p, 1.0)
        assert math.isfinite(v) and 0.0 <= v <= 1.0


def test_combine():
    s = EvaluationScores.combine(0.71, 0.6625, 0.63)
    assert s.to_dict()["aggregate"] == aggregate(0.71, 0.6625, 0.63)


@settings(max_examples=300)
@given(unit, unit, unit)
def test_range(f, i, t):
    v = aggregate(f, i, t)
    assert 0.0 <= v <= 1.0


@settings(max_examples=300)
@given(unit, unit, unit, unit)
def test_monotone_in_founder(f1, f2, i, t):
    lo, hi = sorted((f1, f2))
    assert aggregate(lo, i, t) <= aggregate(hi, i, t)


@settings(max_examples=300)
@given(unit, unit, unit, unit)
def test_monotone_in_idea_and_fit(f, a, b, other):
    lo, hi = sorted((a, b))
    assert aggregate(f, lo, other) <= aggregate(f, hi, other)
    assert aggregate(f, other, lo) <= aggregate(f, other, hi)


@settings(max_examples=200)
@given(st.lists(st.tuples(unit, unit, unit), min_size=1, max_size=30))
def test_array_matches_scalar(triples):
    f, i, t = (np.array(c) for c in zip(*triples))
    expected = [aggregate(*x) for x in triples]
    np.testing.assert_allclose(aggregate_array(f, i, t), expected, rtol=1e-12, atol=0)


@given(positive_unit, positive_unit)
def test_symmetric_in_idea_and_fit(i, t):
    assert aggregate(0.5, i, t) == pytest.approx(aggregate(0.5, t, i), rel=1e-12, abs=1e-300)
