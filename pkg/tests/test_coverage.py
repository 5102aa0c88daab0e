import numpy as np
import pytest

from fiducial.coverage import run_coverage, run_coverage_levels
from fiducial.grid import ParameterGrid
from fiducial.model import make_binomial, make_location


def test_location_levels_nested_and_reproducible():
    dge = make_location(1, bounds=(-12.0, 12.0))
    grid = ParameterGrid((-12.0,), (12.0,), (1201,))
    reps, log = run_coverage_levels(dge, [0.0], [0.5, 0.9], 300, grid, seed=4, keep_log=True)
    assert reps[0.5].coverage <= reps[0.9].coverage
    assert reps[0.9].mean_width == pytest.approx(2 * 1.6449, abs=0.01)
    assert len(log) == 600
    again = run_coverage(dge, [0.0], 0.9, 300, grid, seed=4)
    assert again.coverage == reps[0.9].coverage


def test_discrete_reports_envelope():
    rep = run_coverage(make_binomial(10), [0.4], 0.9, 300, None, seed=1)
    assert rep.envelope_coverage >= rep.coverage
    assert rep.envelope_mean_width >= rep.mean_width


@pytest.mark.parametrize("kwargs", [dict(reps=50), dict(level=1.2), dict(xi_true=[50.0])])
def test_invalid_arguments(kwargs):
    dge = make_location(1, bounds=(-12.0, 12.0))
    args = dict(xi_true=[0.0], level=0.9, reps=200, grid=ParameterGrid((-12.0,), (12.0,), (100,)), seed=0)
    args.update(kwargs)
    with pytest.raises(ValueError):
        run_coverage(dge, **args)


def test_callable_grid():
    dge = make_location(1, bounds=(-100.0, 100.0))
    rep = run_coverage(dge, [0.0], 0.9, 200, lambda x: ParameterGrid((x[0] - 10,), (x[0] + 10,), (1001,)),
                       seed=2)
    assert rep.failures == 0
    assert 0.8 < rep.coverage < 0.97
