import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from covertseq.covert import build_sr_grid, covert_prob_sr, eval_g_sr, sr_cond_cdf
from covertseq.covert.sr import LINEAR, TRAPEZOID, sr_nodes, stieltjes, support_floor
from covertseq.detectors import SrThresholdError
from covertseq.signal_model import POST, PRE


@given(st.floats(min_value=0.01, max_value=3), st.floats(min_value=0, max_value=50), st.floats(min_value=0, max_value=100))
def test_kernel_is_a_cdf(q, u, x):
    for phase in (PRE, POST):
        v = sr_cond_cdf(x, u, q, phase)
        assert 0 <= v <= 1
        assert sr_cond_cdf(x + 1.0, u, q, phase) >= v
    # post-change values are stochastically larger
    assert sr_cond_cdf(x, u, q, POST) <= sr_cond_cdf(x, u, q, PRE) + 1e-15


def test_nodes_span_support():
    xi = sr_nodes(50, 0.2, 300.0)
    assert xi[0] == pytest.approx(1 / 1.2) and xi[-1] == 300.0
    assert np.all(np.diff(xi) > 0)


@pytest.mark.parametrize("rule", [LINEAR, TRAPEZOID])
def test_q1_against_closed_form(rule):
    q, eta = 0.15, 500 / 1.15
    res = covert_prob_sr(q, 1, 0, eta, N=200, rule=rule)
    assert res.value == pytest.approx(1 - ((1 / 1.15) / eta) ** (1 / q), rel=1e-12)


def test_g_is_a_cdf_and_converges():
    grid = build_sr_grid(600, 0.5, 200 / 1.5)
    g = grid.g_n(2000)
    assert g[-1] == pytest.approx(1.0) and np.all(np.diff(g) >= -1e-12)
    assert grid.g_converged_at is not None
    assert np.array_equal(eval_g_sr(0, 0.5, grid), np.ones_like(grid.nodes))


def test_stieltjes_of_constant():
    g = np.linspace(0, 1, 11)
    assert stieltjes(np.full(11, 3.0), g) == pytest.approx(3.0)


def test_rules_agree_at_moderate_q():
    q, eta = 0.5, 200 / 1.5
    a = covert_prob_sr(q, 10, 50, eta, N=1500, rule=LINEAR).value
    b = covert_prob_sr(q, 10, 50, eta, N=1500, rule=TRAPEZOID).value
    assert a == pytest.approx(b, abs=2e-3)


def test_linear_rule_converges_at_small_q():
    q, eta = 0.005, 500 / 1.005
    a = covert_prob_sr(q, 40, 100, eta, N=800).value
    b = covert_prob_sr(q, 40, 100, eta, N=1600).value
    assert a == pytest.approx(b, abs=5e-3)


def test_monotone_in_L_and_nu():
    q, eta = 0.15, 500 / 1.15
    vals = [covert_prob_sr(q, L, 100, eta, N=800).value for L in (1, 5, 20)]
    assert vals[0] >= vals[1] >= vals[2]
    assert covert_prob_sr(q, 15, 0, eta, N=800).value >= covert_prob_sr(q, 15, 100, eta, N=800).value


def test_support_floor_grows_to_one_over_q():
    assert support_floor(0.5, 1) == pytest.approx(1 / 1.5)
    assert support_floor(0.5, 200) == pytest.approx(2.0, rel=1e-9)


def test_threshold_floor_enforced():
    with pytest.raises(SrThresholdError):
        build_sr_grid(10, 0.1, 5.0)
    with pytest.raises(ValueError):
        build_sr_grid(1, 0.1, 50.0)
