import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiducial.grid import ParameterGrid


def test_nodes_are_cell_midpoints():
    g = ParameterGrid((0.0,), (1.0,), (4,))
    np.testing.assert_allclose(g.axis_nodes(0), [0.125, 0.375, 0.625, 0.875])
    np.testing.assert_allclose(g.axis_edges(0), [0, 0.25, 0.5, 0.75, 1.0])


def test_nodes_c_order():
    g = ParameterGrid((0.0, 10.0), (2.0, 13.0), (2, 3))
    nodes = g.nodes
    assert nodes.shape == (6, 2)
    np.testing.assert_allclose(nodes[:3, 0], 0.5)
    np.testing.assert_allclose(nodes[:3, 1], [10.5, 11.5, 12.5])


@pytest.mark.parametrize("lo, hi, counts", [
    ((0.0,), (0.0,), (3,)),
    ((1.0,), (0.0,), (3,)),
    ((0.0,), (np.inf,), (3,)),
    ((0.0,), (1.0,), (0,)),
    ((0.0, 1.0), (1.0,), (3,)),
])
def test_invalid_boxes_rejected(lo, hi, counts):
    with pytest.raises(ValueError):
        ParameterGrid(lo, hi, counts)


def test_refined_and_coarsened():
    g = ParameterGrid((0.0, 0.0), (1.0, 2.0), (10, 50))
    assert g.refined(2).counts == (20, 100)
    assert g.coarsened(32).counts == (10, 32)


@settings(max_examples=50, deadline=None)
@given(st.floats(-50, 50), st.floats(0.01, 20), st.integers(1, 200))
def test_midpoint_rule_volume(lo, width, count):
    g = ParameterGrid((lo,), (lo + width,), (count,))
    assert g.cell_volume * g.size == pytest.approx(g.box_volume, rel=1e-12)
    assert np.all(g.contains(g.nodes))
