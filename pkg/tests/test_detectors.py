import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from covertseq.detectors import (
    CUSUM,
    SHEWHART,
    SR,
    CusumState,
    Detector,
    ShewhartConfig,
    SrState,
    SrThresholdError,
    StoppingRecord,
    check_sr_threshold,
    cusum_step,
    cusum_update,
    run_to_alarm,
    shewhart_step,
    sr_floor,
    sr_step,
    sr_update,
)
from covertseq.signal_model import cusum_drift, likelihood_ratio, stream

powers = st.floats(min_value=1e-3, max_value=5.0)
obs = st.lists(st.floats(min_value=0.0, max_value=20.0), min_size=1, max_size=40)


@given(powers, obs)
def test_cusum_scaled_form_matches_log_lr_walk(q, xs):
    # C_hat is the reflected walk of log-LR scaled by (1+q)/q
    c_hat, c = 0.0, 0.0
    for x in xs:
        c_hat = float(cusum_update(c_hat, x, cusum_drift(q)))
        c = max(0.0, c + math.log(likelihood_ratio(x, q)))
    assert c_hat * q / (1 + q) == pytest.approx(c, rel=1e-9, abs=1e-9)


@given(powers, obs)
def test_sr_recursion_matches_definition(q, xs):
    r = 0.0
    lrs = [likelihood_ratio(x, q) for x in xs]
    for x in xs:
        r = float(sr_update(r, x, q))
    direct = sum(math.prod(lrs[k:]) for k in range(len(lrs)))
    assert r == pytest.approx(direct, rel=1e-9)


@given(powers, st.integers(min_value=0, max_value=200))
def test_sr_floor_is_reached_at_zero_power(q, t):
    r = 0.0
    for _ in range(t):
        r = float(sr_update(r, 0.0, q))
    assert r == pytest.approx(sr_floor(q, t), rel=1e-9, abs=1e-12)


def test_state_steps_agree_with_vector_updates():
    q = 0.3
    s = CusumState.start(q, 5.0)
    v = SrState.start(q, 10.0)
    xs = [2.0, 0.1, 3.5]
    c, r = 0.0, 0.0
    for x in xs:
        s, v = cusum_step(s, x), sr_step(v, x)
        c, r = cusum_update(c, x, cusum_drift(q)), sr_update(r, x, q)
    assert s.c_hat == pytest.approx(float(c))
    assert v.r == pytest.approx(float(r))


def test_shewhart_threshold():
    cfg = ShewhartConfig(math.log(500))
    assert shewhart_step(7.0, cfg) and not shewhart_step(6.0, cfg)
    assert list(shewhart_step(np.array([1.0, 9.0]), cfg)) == [False, True]


def test_sr_threshold_floor():
    check_sr_threshold(1 / 0.2, 0.2)
    with pytest.raises(SrThresholdError):
        check_sr_threshold(4.0, 0.2)
    with pytest.raises(SrThresholdError):
        Detector(SR, 4.0, 0.2)
    with pytest.raises(ValueError):
        Detector("ewma", 4.0, 0.2)


def test_stopping_record():
    assert StoppingRecord(5, 10).alarmed_pre_change
    rec = StoppingRecord(14, 10)
    assert not rec.alarmed_pre_change and rec.delay == 4


def test_run_to_alarm_reproducible():
    det = Detector(CUSUM, 6.0, 0.5)
    a = run_to_alarm(det, 20, 10, stream(3))
    b = run_to_alarm(det, 20, 10, stream(3))
    assert a == b and a.t_stop >= 1


def test_run_to_alarm_censors():
    det = Detector(SHEWHART, 50.0, 0.1)
    rec = run_to_alarm(det, math.inf, 1, stream(0), max_steps=100)
    assert rec.censored and rec.t_stop == 100
