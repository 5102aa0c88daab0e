import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fiducial.density import (
    FiducialDensity,
    density_cdf_quantile,
    fisher_fiducial,
    ks_distance,
    tabulate_gfd,
    tabulate_posterior,
)
from fiducial.errors import NonIntegrable, NotMonotone
from fiducial.grid import ParameterGrid
from fiducial.model import d_sample_mean_sd, make_location, make_normal_location_scale, sample_mean_sd


@pytest.fixture(scope="module")
def location_fd():
    return tabulate_gfd(make_location(1), [0.0], ParameterGrid((-8.0,), (8.0,), (2001,)))


def test_location_density_is_normal(location_fd):
    fd = location_fd
    assert fd.mass() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(fd.values, stats.norm.pdf(fd.grid.axis_nodes(0)), atol=1e-5)
    assert density_cdf_quantile(fd, 0.975) == pytest.approx(1.959964, abs=2e-3)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.001, 0.999))
def test_quantile_inverts_cdf(location_fd, q):
    assert float(location_fd.cdf(location_fd.quantile(q))) == pytest.approx(q, abs=1e-10)


def test_normal_ls_density_positive_and_normalised():
    x = np.array([-0.5, -0.2, 0.0, 0.3, 0.6])
    grid = ParameterGrid((-4.0, 0.01), (4.0, 4.0), (200, 200))
    fd = tabulate_gfd(make_normal_location_scale(5, bounds=((-4.0, 0.01), (4.0, 4.0))), x, grid)
    assert fd.values.shape == (200, 200)
    assert np.all(fd.values >= 0)
    assert fd.mass() == pytest.approx(1.0)
    assert fd.marginal(0).mass() == pytest.approx(1.0)


def test_full_and_sufficient_weights_agree():
    # for location-scale the two weights differ only by a factor depending on x
    x = np.array([-0.5, -0.2, 0.0, 0.3, 0.6])
    box = ((-3.0, 0.02), (3.0, 3.0))
    dge = make_normal_location_scale(5, bounds=box)
    grid = ParameterGrid(*box, (120, 120))
    full = tabulate_gfd(dge, x, grid)
    suff = tabulate_gfd(dge, x, grid, statistic=sample_mean_sd, dS_dx=d_sample_mean_sd)
    np.testing.assert_allclose(full.values, suff.values, rtol=1e-8, atol=1e-12)


def test_posterior_with_flat_prior_is_normal_for_location():
    grid = ParameterGrid((-8.0,), (8.0,), (801,))
    post = tabulate_posterior(make_location(1), [0.5], grid, lambda xis: np.zeros(len(xis)))
    np.testing.assert_allclose(post.values, stats.norm.pdf(grid.axis_nodes(0), 0.5), atol=1e-4)


def test_truncated_box_fails_refinement_check():
    x = np.array([0.0, 0.1, 0.2])
    dge = make_normal_location_scale(3, bounds=((-1.0, 1e-4), (1.0, 1.0)))
    with pytest.raises(NonIntegrable):
        tabulate_gfd(dge, x, ParameterGrid((-1.0, 1e-4), (1.0, 1.0), (6, 6)))


def test_fisher_density_matches_normal():
    grid = ParameterGrid((-9.0,), (11.0,), (2001,))
    fd = fisher_fiducial(lambda x, t: stats.norm.cdf(x - t), 1.0, grid)
    np.testing.assert_allclose(fd.values, stats.norm.pdf(grid.axis_nodes(0), 1.0), atol=1e-5)


def test_fisher_rejects_increasing_cdf():
    grid = ParameterGrid((0.1,), (5.0,), (100,))
    with pytest.raises(NotMonotone):
        fisher_fiducial(lambda x, t: -np.expm1(-t * x), 2.0, grid)


def test_from_values_normalises():
    grid = ParameterGrid((0.0,), (2.0,), (4,))
    fd = FiducialDensity.from_values(grid, [1, 1, 1, 1])
    np.testing.assert_allclose(fd.values, 0.5)
    with pytest.raises(ValueError):
        FiducialDensity.from_values(grid, [1, -1, 1, 1])


def test_ks_distance_small_for_exact_draws(location_fd):
    draws = np.random.default_rng(0).normal(size=20_000)
    assert ks_distance(draws, location_fd) < 0.015
    assert ks_distance(draws + 0.5, location_fd) > 0.15


def test_weighted_ks_equals_unweighted_for_equal_weights(location_fd):
    draws = np.random.default_rng(1).normal(size=500)
    a = ks_distance(draws, location_fd)
    b = ks_distance(draws, location_fd, weights=np.ones(500))
    assert a == pytest.approx(b, abs=1e-12)
