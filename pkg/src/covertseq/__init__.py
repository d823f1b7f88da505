"""Covert transmission against Shewhart, CUSUM and Shiryaev-Roberts detectors.

A transmitter raises the received power at a warden by a factor ``1 + q`` for
``L`` samples.  The warden runs a sequential change detector calibrated to a
mean time to false alarm ``gamma``.  This package computes the probability
that the transmission goes unnoticed, checks it by simulation, and finds the
``(q, L)`` maximizing throughput under a floor on that probability.
"""

from .calibration import calibrate_cusum, calibrate_shewhart, calibrate_sr, threshold_for
from .covert import covert_prob
from .detectors import CUSUM, SHEWHART, SR, TESTS, Detector
from .montecarlo import estimate_arl2fa, estimate_covert_prob
from .optimizer import Optimum, algorithm1, approx_shewhart, exhaustive_shewhart, feasibility_check
from .signal_model import ScenarioParams

__version__ = "0.1.0"

__all__ = [
    "CUSUM",
    "SHEWHART",
    "SR",
    "TESTS",
    "Detector",
    "Optimum",
    "ScenarioParams",
    "algorithm1",
    "approx_shewhart",
    "calibrate_cusum",
    "calibrate_shewhart",
    "calibrate_sr",
    "covert_prob",
    "estimate_arl2fa",
    "estimate_covert_prob",
    "exhaustive_shewhart",
    "feasibility_check",
    "threshold_for",
]
