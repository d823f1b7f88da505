import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from covertseq.calibration import threshold_for
from covertseq.covert import covert_prob_shewhart
from covertseq.optimizer import (
    ALGORITHM1,
    InfeasibleError,
    algorithm1,
    algorithm1_sweep,
    approx_roots,
    approx_shewhart,
    exhaustive_shewhart,
    feasibility_check,
    lmax_shewhart,
    optimal_q_for_L_shewhart,
    optimize,
    q_grid,
    shewhart_duration,
    utility,
)
from covertseq.signal_model import cusum_drift


def test_utility_in_nats():
    assert utility(1.0, 3) == pytest.approx(3 * math.log(2))
    assert utility(1.0, 3, sigma_ratio=0.5) == pytest.approx(3 * math.log(1.5))


@given(st.integers(1, 25))
def test_q_of_L_makes_constraint_active(L):
    q = optimal_q_for_L_shewhart(L, 500, 0.95)
    assert covert_prob_shewhart(q, L, 500).value == pytest.approx(0.95, abs=1e-12)


def test_lmax():
    assert lmax_shewhart(500, 0.95) == 25
    with pytest.raises(InfeasibleError):
        lmax_shewhart(500, 0.999)
    with pytest.raises(InfeasibleError):
        optimal_q_for_L_shewhart(26, 500, 0.95)


def test_exhaustive_local_optimum():
    opt = exhaustive_shewhart(500, 0.95)
    assert opt.feasible
    assert covert_prob_shewhart(opt.q_star, opt.l_star, 500).value == pytest.approx(0.95, abs=1e-9)
    for L in (opt.l_star - 1, opt.l_star + 1):
        assert utility(optimal_q_for_L_shewhart(L, 500, 0.95), L) < opt.i_star


def test_near_boundary_forces_single_sample():
    opt = exhaustive_shewhart(500, 0.9975)
    assert opt.l_star == 1


def test_exhaustive_infeasible_is_reported():
    opt = exhaustive_shewhart(500, 0.999)
    assert not opt.feasible and "1 - 1/gamma" in opt.diagnostics["reason"]


def test_approx_roots():
    u1, u2 = approx_roots(500)
    assert u1 == pytest.approx(0.2524, abs=1e-4) and u2 > u1
    assert approx_roots(50) is None


def test_approx_uses_floor_of_duration():
    opt = approx_shewhart(500, 0.95)
    assert opt.l_star == shewhart_duration(opt.diagnostics["u1"], 500, 0.95)
    assert covert_prob_shewhart(opt.q_star, opt.l_star, 500).value == pytest.approx(0.95, abs=1e-9)


def test_approx_falls_back_below_e4():
    opt = approx_shewhart(50, 0.95)
    assert opt.diagnostics["fallback"] == "complex root"
    assert opt.i_star == exhaustive_shewhart(50, 0.95).i_star


def test_q_grid():
    qs = q_grid(1e-3, 2.0, 1e-3)
    assert len(qs) == 2000 and qs[0] == 1e-3 and qs[-1] == 2.0
    with pytest.raises(ValueError):
        q_grid(0.0, 1.0, 0.1)


@pytest.fixture(scope="module")
def cusum_sweep():
    return algorithm1_sweep("cusum", [0, 50], [0.95, 0.99], 500.0, q_min=0.1, q_max=0.5, dq=0.1, threads=1)


def test_algorithm1_frontier(cusum_sweep):
    from covertseq.covert import covert_prob_cusum

    for (nu, theta), opt in cusum_sweep.items():
        assert opt.feasible and opt.method == ALGORITHM1
        eta = threshold_for("cusum", 500.0, opt.q_star)
        assert covert_prob_cusum(opt.q_star, opt.l_star, nu, eta).value >= theta
        assert covert_prob_cusum(opt.q_star, opt.l_star + 1, nu, eta).value < theta


def test_algorithm1_trends(cusum_sweep):
    assert cusum_sweep[(0, 0.95)].i_star >= cusum_sweep[(50, 0.95)].i_star
    assert cusum_sweep[(50, 0.95)].i_star >= cusum_sweep[(50, 0.99)].i_star


def test_sweep_matches_single_run(cusum_sweep):
    single = algorithm1("cusum", 50, 0.99, 500.0, q_min=0.1, q_max=0.5, dq=0.1, threads=1)
    assert (single.q_star, single.l_star) == (cusum_sweep[(50, 0.99)].q_star, cusum_sweep[(50, 0.99)].l_star)


def test_algorithm1_thread_independent():
    # the argmax does not depend on how the grid was split across threads
    a = algorithm1("cusum", 0, 0.95, 500.0, q_min=0.2, q_max=0.4, dq=0.1, threads=1)
    b = algorithm1("cusum", 0, 0.95, 500.0, q_min=0.2, q_max=0.4, dq=0.1, threads=2)
    assert (a.q_star, a.l_star, a.i_star) == (b.q_star, b.l_star, b.i_star)


def test_algorithm1_infeasible_is_not_raised():
    opt = algorithm1("cusum", 50, 0.99999, 500.0, q_min=0.5, q_max=1.0, dq=0.5, threads=1)
    assert not opt.feasible and opt.trace


def test_sr_small_nu_high_theta_feasible():
    opt = algorithm1("sr", 10, 0.99, 500.0, q_min=0.05, q_max=0.5, dq=0.05, n_grid=400, threads=1)
    assert opt.feasible and opt.i_star > 0


def test_optimize_dispatch():
    assert optimize("shewhart", "approx", 500, 0.95).method == "approx"
    with pytest.raises(ValueError):
        optimize("cusum", "approx", 500, 0.95)


def test_feasibility_shewhart_bound_is_one_sample_probability():
    rep = feasibility_check("shewhart", 0.15, 0, 500)
    assert rep.max_theta == pytest.approx(covert_prob_shewhart(0.15, 1, 500).value, rel=1e-14)
    assert rep.admits(0.99) and not rep.admits(0.999)


def test_feasibility_cusum_small_q_below_envelope():
    q = 1e-3
    eta = threshold_for("cusum", 500, q)
    rep = feasibility_check("cusum", q, 50, 500)
    envelope = 1 - math.exp(-(cusum_drift(q) + eta) / (1 + q))
    assert rep.max_theta < 1 and rep.max_theta <= envelope


def test_feasibility_sr_small_q_small_nu_near_one():
    rep = feasibility_check("sr", 0.003, 10, 500, n_grid=600)
    assert rep.max_theta > 0.999


def test_feasibility_matches_one_sample_covert_prob():
    from covertseq.covert import covert_prob

    rep = feasibility_check("cusum", 0.15, 100, 500)
    assert rep.max_theta == pytest.approx(covert_prob("cusum", 0.15, 1, 100, 500).value, abs=1e-9)
