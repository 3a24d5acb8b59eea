import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coalgame.erlang import blocking_probability, inverse_load
from coalgame.errors import DomainError


def blocking_direct(m: int, a: float) -> float:
    """Reference: direct evaluation of the defining sum."""
    if m == 0:
        return 1.0
    terms = [a**j / math.factorial(j) for j in range(m + 1)]
    return terms[-1] / sum(terms)


def test_edge_cases():
    assert blocking_probability(0, 3.7) == 1.0
    assert blocking_probability(0, 0.0) == 1.0
    assert blocking_probability(5, 0.0) == 0.0
    assert blocking_probability(1, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert blocking_probability(2, 2.0) == pytest.approx(0.4, abs=1e-15)


def test_domain_errors():
    with pytest.raises(DomainError):
        blocking_probability(-1, 1.0)
    with pytest.raises(DomainError):
        blocking_probability(2, -0.5)
    with pytest.raises(DomainError):
        inverse_load(0, 0.5)
    with pytest.raises(DomainError):
        inverse_load(2, 1.0)
    with pytest.raises(DomainError):
        inverse_load(2, 0.0)


def test_recurrence_matches_direct_sum():
    grid = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 35.0, 50.0]
    for m in range(1, 21):
        for a in grid:
            assert blocking_probability(m, a) == pytest.approx(
                blocking_direct(m, a), abs=1e-12
            )


def test_monotonicity():
    a_grid = [0.2 * i for i in range(1, 60)]
    for m in (1, 3, 8, 15):
        vals = [blocking_probability(m, a) for a in a_grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))
    for a in (0.5, 2.0, 10.0, 40.0):
        vals = [blocking_probability(m, a) for m in range(0, 25)]
        assert all(b < a_ for a_, b in zip(vals, vals[1:]))


@settings(max_examples=80, deadline=None)
@given(st.floats(0.01, 100.0), st.floats(0.01, 100.0), st.floats(0.1, 10.0))
def test_scale_invariance_through_offered_load(lam, mu, c):
    # B sees lambda and mu only through their ratio
    m = 7
    assert blocking_probability(m, lam / mu) == pytest.approx(
        blocking_probability(m, (c * lam) / (c * mu)), rel=1e-12
    )


def test_inverse_examples():
    assert inverse_load(1, 0.5) == pytest.approx(1.0, abs=1e-10)
    assert inverse_load(2, 0.4) == pytest.approx(2.0, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 30), st.floats(0.01, 50.0))
def test_round_trip(m, a0):
    b = blocking_probability(m, a0)
    assert 0.0 < b < 1.0
    assert inverse_load(m, b) == pytest.approx(a0, abs=1e-10)


def test_inverse_residual_tolerance():
    for m, b in [(3, 0.2), (12, 0.75), (23, 0.9999), (9, 1e-20)]:
        a = inverse_load(m, b)
        assert abs(blocking_probability(m, a) - b) <= 1e-12
