import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from covertseq.chebyshev import PiecewiseCheb, basis_matrix, integral_matrix

EDGES = np.array([0.0, 0.7, 1.9, 3.0])


def f(x):
    return np.exp(-x) * np.cos(2 * x) + np.where(x > 1.9, x - 1.9, 0.0)


def test_interpolates_piecewise_smooth_function():
    p = PiecewiseCheb.from_function(f, EDGES, 20)
    x = np.linspace(0, 3, 301)
    assert np.max(np.abs(p(x) - f(x))) < 1e-12


def test_nodes_reproduce_values():
    p = PiecewiseCheb.from_function(f, EDGES, 12)
    nodes = PiecewiseCheb.nodes(EDGES, 12)
    # shared edges are read from the right-hand piece; f is continuous there
    assert np.allclose(p(nodes.ravel()), p.values.ravel(), atol=1e-14, rtol=0)


def test_basis_partition_of_unity():
    b = basis_matrix(9, np.linspace(-1, 1, 17))
    assert np.allclose(b.sum(axis=1), 1.0)


@given(st.floats(min_value=0.0, max_value=3.0), st.sampled_from([-1.0, 0.0, 0.5]))
def test_integral_matrix_matches_direct_integral(upper, rate):
    order = 16
    p = PiecewiseCheb.from_function(np.sin, EDGES, order)
    row = integral_matrix(EDGES, order, [upper], rate)[0]
    direct = p.integral(0.0, upper, rate)
    assert row @ p.values.ravel() == pytest.approx(direct, abs=1e-12)
    assert float(p.antiderivative(upper, rate)[0]) == pytest.approx(direct, abs=1e-12)


def test_integral_exact_against_closed_form():
    p = PiecewiseCheb.from_function(lambda x: x, EDGES, 8)
    # int_0^3 x e^-x dx
    assert p.integral(0, 3, -1.0) == pytest.approx(1 - 4 * math.exp(-3), rel=1e-13)
