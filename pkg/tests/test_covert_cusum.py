import numpy as np
import pytest

from covertseq.calibration import calibrate_cusum
from covertseq.covert import (
    CusumCovertModel,
    build_a_tables,
    build_v_tables,
    covert_prob_cusum,
    cusum_cond_cdf,
    integral_oracle_cusum,
)
from covertseq.covert.cusum import ORACLE, TABLES, table_self_test
from covertseq.covert.cusum_oracle import breakpoints, self_convergence
from covertseq.signal_model import POST, PRE, cusum_drift

CASES = [(0.15, 500.0), (0.5, 200.0), (1.0, 50.0)]


@pytest.fixture(scope="module", params=CASES, ids=lambda c: f"q{c[0]}-g{c[1]:g}")
def case(request):
    q, gamma = request.param
    eta = calibrate_cusum(gamma, q)
    return q, eta, integral_oracle_cusum(12, q, eta)


def test_q_tables_match_oracle(case):
    q, eta, orc = case
    v = build_v_tables(12, q, eta)
    x = np.random.default_rng(0).uniform(0, eta, 50)
    for n in range(1, 13):
        assert np.max(np.abs(v.q_n(n, x) - orc.q_n(n, x))) < 1e-9


def test_g_tables_match_oracle(case):
    q, eta, orc = case
    a = build_a_tables(12, q, eta)
    x = np.random.default_rng(1).uniform(0, eta, 50)
    for n in range(1, 13):
        assert np.max(np.abs(a.g(n, x) - orc.g_n(n, x))) < 1e-9
        assert np.max(np.abs(a.density(n, x) - orc.g_density(n, x))) < 1e-7


def test_oracle_self_convergence():
    q = 0.5
    eta = calibrate_cusum(200.0, q)
    assert self_convergence(q, eta, 8, order=12) < 1e-9


def test_breakpoints_cover_both_families():
    w = cusum_drift(0.5)
    pts = breakpoints(5.0, w)
    assert pts[0] == 0 and pts[-1] == 5.0
    assert np.any(np.isclose(pts, w)) and np.any(np.isclose(pts, 5.0 - w))


def test_one_step_kernel():
    q, w = 0.3, cusum_drift(0.3)
    # mass at zero equals P(x <= omega - u)
    assert cusum_cond_cdf(0.0, 0.2, q, PRE) == pytest.approx(1 - np.exp(-(w - 0.2)))
    assert cusum_cond_cdf(0.0, 0.2, q, POST) == pytest.approx(1 - np.exp(-(w - 0.2) / 1.3))
    assert cusum_cond_cdf(-0.1, 0.2, q, PRE) == 0.0


def test_covert_prob_shape_and_bounds():
    q, eta = 0.15, calibrate_cusum(500.0, 0.15)
    m = CusumCovertModel(q, eta)
    vals = [m.covert_prob(L, 50).value for L in (1, 5, 15, 40)]
    assert all(0 <= v <= 1 for v in vals)
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    # starting from zero is the most favorable start
    assert m.covert_prob(15, 0).value >= m.covert_prob(15, 50).value
    assert m.covert_prob(15, 0).diagnostics["atom"] == 1.0


def test_engines_agree():
    q, eta = 0.5, calibrate_cusum(200.0, 0.5)
    a = CusumCovertModel(q, eta, TABLES).covert_prob(10, 30).value
    b = CusumCovertModel(q, eta, ORACLE).covert_prob(10, 30).value
    assert a == pytest.approx(b, abs=1e-8)


def test_auto_engine_switches_for_many_pieces():
    q = 0.01
    eta = calibrate_cusum(500.0, q)
    m = CusumCovertModel(q, eta)
    assert m.M > 18 and m.engine == ORACLE
    assert 0 < covert_prob_cusum(q, 20, 100, eta).value <= 1


def test_self_test_passes():
    ok, worst = table_self_test()
    assert ok and worst < 1e-6


def test_expectation_of_constant_is_one():
    q, eta = 0.15, calibrate_cusum(500.0, 0.15)
    m = CusumCovertModel(q, eta)
    assert m.expectation(50, lambda x: np.ones_like(np.asarray(x, dtype=float))) == pytest.approx(1.0, abs=1e-9)


def test_invalid_arguments():
    m = CusumCovertModel(0.5, 6.0)
    with pytest.raises(ValueError):
        m.covert_prob(0, 0)
    with pytest.raises(ValueError):
        m.covert_prob(3, -1)
    with pytest.raises(ValueError):
        CusumCovertModel(0.5, 6.0, "magic")
