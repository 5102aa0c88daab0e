import numpy as np
import pytest
from scipy import stats

from fiducial.errors import ZeroJacobian
from fiducial.grid import ParameterGrid
from fiducial.model import make_location, make_normal_location_scale
from fiducial.principles import (
    check_separability,
    check_slp_pair,
    check_slp_pair_sequential,
    mixture_cdf,
    sequential_events,
    wcp_demo,
)


def test_sequential_events_fixed_stage_probability():
    # at theta = 0 the one-sided final-stage z test fires with probability 0.025
    o1, o2 = sequential_events(1.0, 169)(np.random.default_rng(0), 0.0, 100_000)
    assert o1.mean() == pytest.approx(stats.norm.sf(1.96), abs=0.0015)
    assert np.all(o1[o2])


def test_constant_conditional_probability_is_slp_pair():
    # O2 independent of O1 with a theta-free conditional probability
    def simulate(rng, theta, size):
        o1 = rng.random(size) < 0.3 + 0.4 * theta
        o2 = rng.random(size) < 0.2
        return o1, o2

    rep = check_slp_pair(simulate, [0.0, 0.25, 0.5, 1.0], 40_000, seed=1)
    assert rep.verdict == "SLP-pair"
    assert not rep.constant_rejected


def test_decreasing_conditional_probability_is_refuted():
    def simulate(rng, theta, size):
        o1 = rng.random(size) < 0.5
        o2 = rng.random(size) < 0.3 * (1 - theta)
        return o1, o2

    rep = check_slp_pair(simulate, [0.0, 0.5, 1.0], 40_000, seed=2)
    assert rep.verdict == "not-SLP-pair"
    assert rep.isotonic_accepted
    np.testing.assert_allclose(rep.decomposition_error, 0, atol=1e-12)


def test_gaps_make_verdict_inconclusive():
    def simulate(rng, theta, size):
        return np.zeros(size, bool), np.zeros(size, bool)

    rep = check_slp_pair(simulate, [0.0, 1.0], 1000, seed=0)
    assert rep.verdict == "inconclusive"
    assert rep.gaps == [0.0, 1.0]


def test_slp_pair_seed_reproducible_and_worker_independent():
    a = check_slp_pair_sequential(theta_grid=(0.0, 0.5), reps=5000, seed=3, workers=1)
    b = check_slp_pair_sequential(theta_grid=(0.0, 0.5), reps=5000, seed=3, workers=2)
    np.testing.assert_array_equal(a.n_o1, b.n_o1)
    np.testing.assert_array_equal(a.n_o2, b.n_o2)


def test_location_scale_jacobian_is_separable():
    rng = np.random.default_rng(0)
    datasets = [rng.normal(size=4) for _ in range(4)]
    grid = ParameterGrid((-2.0, 0.2), (2.0, 3.0), (15, 15))
    rep = check_separability(make_normal_location_scale(4), datasets, grid)
    assert rep.separable
    # implied prior is proportional to 1/sigma
    sig = grid.nodes[:, 1]
    ratio = rep.implied_prior().ravel() * sig
    np.testing.assert_allclose(ratio / ratio[0], 1.0, rtol=1e-8)


def test_non_separable_jacobian_detected():
    datasets = [np.array([0.0]), np.array([1.0]), np.array([2.5])]
    grid = ParameterGrid((-1.0,), (1.0,), (20,))
    rep = check_separability(make_location(1), datasets, grid,
                             jacobian_fn=lambda x, xis: np.exp(x[0] * xis[:, 0] ** 2))
    assert not rep.separable


def test_zero_jacobian_rejected():
    grid = ParameterGrid((-1.0,), (1.0,), (20,))
    with pytest.raises(ZeroJacobian):
        check_separability(make_location(1), [np.array([0.0]), np.array([1.0])], grid,
                           jacobian_fn=lambda x, xis: np.zeros(len(xis)))


def test_wcp_demo_small():
    rep = wcp_demo(1.0, 10.0, 0.0, 1, 3000, seed=5)
    assert rep.ks_conditional < 0.04
    assert rep.ks_marginal < 0.04
    assert len(rep.table["theta"]) == 160
    # the conditional and marginal fiducial laws are visibly different
    assert stats.kstest(rep.marginal.draws[:, 0], stats.norm(0, 1).cdf).statistic > 0.1


def test_mixture_cdf():
    cdf = mixture_cdf(0.0, 1.0, 10.0)
    assert cdf(0.0) == pytest.approx(0.5)
    assert cdf(1.0) == pytest.approx(0.5 * stats.norm.cdf(1) + 0.5 * stats.norm.cdf(0.1))
