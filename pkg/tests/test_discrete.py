import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiducial.discrete import default_p_grid, discrete_bounds, half_corrected_interval, model_bounds, slp_violation_demo
from fiducial.errors import InvalidCdf, NotMonotone
from fiducial.model import make_binomial, make_geometric


def test_geometric_envelope_closed_form():
    p = np.linspace(0.01, 0.99, 99)
    b = model_bounds(make_geometric(), 3, p)
    np.testing.assert_allclose(b.upper, 1 - (1 - p) ** 3, atol=1e-14)
    np.testing.assert_allclose(b.lower, 1 - (1 - p) ** 2, atol=1e-14)
    assert b.direction == "increasing"


def test_binomial_envelope_closed_form():
    p = np.linspace(0.01, 0.99, 99)
    b = model_bounds(make_binomial(3), 1, p)
    np.testing.assert_allclose(b.upper, 1 - (1 - p) ** 3, atol=1e-12)
    np.testing.assert_allclose(b.lower, 1 - (1 - p) ** 3 - 3 * p * (1 - p) ** 2, atol=1e-12)
    assert b.direction == "decreasing"


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12))
def test_slp_demo_gaps(n):
    rep = slp_violation_demo(n, default_p_grid(2000))
    p = rep.p
    assert rep.upper_gap <= 1e-12
    np.testing.assert_allclose(rep.geometric.lower - rep.binomial.lower, (n - 1) * p * (1 - p) ** (n - 1),
                               atol=1e-12)
    np.testing.assert_allclose(rep.width_binomial, n * p * (1 - p) ** (n - 1), atol=1e-12)
    assert np.all(rep.geometric.lower <= rep.geometric.half)
    assert np.all(rep.geometric.half <= rep.geometric.upper)


def test_slp_demo_values_at_half():
    rep = slp_violation_demo(3, np.array([0.25, 0.5, 0.75]))
    assert rep.geometric.half[1] == pytest.approx(0.8125, abs=1e-12)
    assert rep.binomial.half[1] == pytest.approx(0.6875, abs=1e-12)


def test_slp_demo_requires_n_at_least_two():
    with pytest.raises(ValueError):
        slp_violation_demo(1)


def test_invalid_cdf_rejected():
    with pytest.raises(InvalidCdf):
        discrete_bounds(lambda x, p: 2 * p, 1, np.linspace(0.1, 0.9, 9))
    with pytest.raises(NotMonotone):
        discrete_bounds(lambda x, p: np.where(x >= 1, 0.5 + 0.4 * np.sin(8 * p), 0.1), 1, np.linspace(0.1, 0.9, 50))


def test_interval_nesting_and_level_monotonicity():
    b = model_bounds(make_binomial(20), 7)
    prev = None
    for level in (0.5, 0.8, 0.9, 0.95, 0.99):
        iv = half_corrected_interval(b, level)
        assert iv.envelope_lo <= iv.lo <= iv.hi <= iv.envelope_hi
        if prev is not None:
            assert iv.lo <= prev.lo and iv.hi >= prev.hi
        prev = iv


def test_interval_reaches_support_edge():
    # X = 0 successes: the upper CDF is 1 - (1-p)^n and the lower bound is 0
    iv = half_corrected_interval(model_bounds(make_binomial(5), 0), 0.95)
    assert iv.envelope_lo == pytest.approx(0.0)
    assert 0 < iv.hi < 1
