import numpy as np
import pytest

from covertseq.calibration import calibrate_shewhart
from covertseq.covert import covert_prob_shewhart
from covertseq.detectors import CUSUM, SHEWHART, SR, Detector
from covertseq.montecarlo import (
    CensoringError,
    ConditioningStarvation,
    empirical_statistic_cdf,
    estimate_arl2fa,
    estimate_covert_prob,
    ks_distance,
    thread_count,
)


def test_shewhart_matches_closed_form():
    det = Detector(SHEWHART, calibrate_shewhart(500), 0.15)
    est = estimate_covert_prob(det, 10, 15, 100_000, seed=3)
    assert est.within(covert_prob_shewhart(0.15, 15, 500).value, 4)


def test_deterministic_across_threads():
    det = Detector(CUSUM, 6.0, 0.5)
    a = estimate_covert_prob(det, 20, 10, 40_000, seed=11, threads=1)
    b = estimate_covert_prob(det, 20, 10, 40_000, seed=11, threads=4)
    assert a == b


def test_arl_of_shewhart_is_gamma():
    det = Detector(SHEWHART, calibrate_shewhart(50), 0.3)
    est = estimate_arl2fa(det, 50_000, seed=1)
    assert est.within(50.0, 4)


def test_censoring_raises():
    det = Detector(SR, 1e6, 0.5)
    with pytest.raises(CensoringError):
        estimate_arl2fa(det, 2000, seed=0, max_steps=50)


def test_starvation_raises():
    det = Detector(SHEWHART, 0.01, 0.5)
    with pytest.raises(ConditioningStarvation):
        estimate_covert_prob(det, 5, 1, 2000, seed=0)


def test_trial_floor():
    with pytest.raises(ValueError):
        estimate_covert_prob(Detector(SHEWHART, 5.0, 0.5), 1, 1, 10, seed=0)


def test_empirical_cdf_and_ks():
    det = Detector(SHEWHART, calibrate_shewhart(100), 0.3)
    emp = empirical_statistic_cdf(det, 5, 20_000, seed=2)
    # kept pre-change powers are Exp(1) truncated at log(gamma)
    eta = np.log(100)
    cdf = lambda x: np.clip((1 - np.exp(-x)) / (1 - np.exp(-eta)), 0, 1)
    assert ks_distance(emp, cdf) < 0.02
    assert emp(1e9) == pytest.approx(1.0)


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("COVERTSEQ_THREADS", "1")
    assert thread_count() == 1
    monkeypatch.setenv("COVERTSEQ_THREADS", "many")
    with pytest.raises(ValueError):
        thread_count()
