import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from covertseq.calibration import (
    CLOSED_FORM_MAX_EXPONENT,
    CalibrationError,
    calibrate_cusum,
    calibrate_shewhart,
    calibrate_sr,
    cusum_arl,
    cusum_arl_collocation,
    cusum_arl_renewal,
    cusum_phi,
    shewhart_lr_threshold,
    solve_phi0,
    sr_arl,
    threshold_for,
)
from covertseq.signal_model import cusum_drift


def test_shewhart_threshold_is_log_gamma():
    assert calibrate_shewhart(500) == pytest.approx(6.21461, abs=1e-5)
    # per-sample false alarm exp(-eta) = 1/gamma
    assert math.exp(-calibrate_shewhart(1234.0)) == pytest.approx(1 / 1234.0)
    with pytest.raises(CalibrationError):
        calibrate_shewhart(1.0)


def test_shewhart_lr_threshold_consistent():
    q, eta = 0.4, calibrate_shewhart(500)
    assert math.log(shewhart_lr_threshold(eta, q)) == pytest.approx(q * eta / (1 + q) - math.log1p(q))


@given(st.floats(min_value=2.0, max_value=1e5), st.floats(min_value=0.01, max_value=5.0))
def test_sr_identity(gamma, q):
    if gamma / (1 + q) < 1 / q:
        with pytest.raises(CalibrationError):
            calibrate_sr(gamma, q)
        return
    sol = calibrate_sr(gamma, q)
    assert sol.eta_r == pytest.approx(gamma / (1 + q))
    assert abs(sol.arl_at_zero - gamma) <= 1e-12 * gamma


def test_sr_arl_decreases_with_start():
    assert sr_arl(0.0, 400, 0.25) > sr_arl(10.0, 400, 0.25)


@pytest.mark.parametrize("q,eta", [(0.15, 14.0), (0.5, 7.0), (2.0, 5.0), (0.05, 12.0)])
def test_closed_form_matches_collocation_and_renewal(q, eta):
    w = cusum_drift(q)
    closed = solve_phi0(eta, w).phi0
    assert cusum_arl_collocation(eta, w) == pytest.approx(closed, rel=1e-10)
    assert cusum_arl_renewal(eta, w) == pytest.approx(closed, rel=1e-5)


def test_small_q_uses_collocation_and_stays_positive():
    q = 1e-3
    eta = 20.93
    assert cusum_drift(q) + eta > CLOSED_FORM_MAX_EXPONENT
    phi = cusum_arl(eta, q)
    assert phi == pytest.approx(cusum_arl_renewal(eta, cusum_drift(q), per_omega=40), rel=1e-3)
    assert phi > 1


def test_arl_increases_with_threshold():
    vals = [cusum_arl(eta, 0.3) for eta in (1.0, 3.0, 6.0, 9.0, 12.0)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_phi_increment_starts_at_phi0():
    q, eta = 0.3, 8.0
    sol = solve_phi0(eta, cusum_drift(q))
    assert float(sol.phi(0.0)) == pytest.approx(sol.phi0, rel=1e-12)
    # phi is decreasing in the starting point
    assert float(cusum_phi(1.0, eta, sol.omega, sol.phi0)) > float(cusum_phi(6.0, eta, sol.omega, sol.phi0))


@pytest.mark.parametrize("gamma,q", [(500, 0.15), (200, 0.5), (500, 0.01), (1000, 1.0)])
def test_cusum_calibration_hits_gamma(gamma, q):
    eta = calibrate_cusum(gamma, q)
    assert abs(cusum_arl(eta, q) - gamma) <= 1e-6 * gamma


def test_known_thresholds():
    assert calibrate_cusum(500, 0.15) == pytest.approx(14.216, abs=1e-3)
    assert threshold_for("sr", 500, 0.25) == pytest.approx(400)
    assert threshold_for("shewhart", 500, 0.3) == pytest.approx(math.log(500))
    with pytest.raises(ValueError):
        threshold_for("ewma", 500, 0.3)
