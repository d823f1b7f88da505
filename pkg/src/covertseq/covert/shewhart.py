"""Shewhart covert probability: samples are judged one at a time, so it is a power."""

from __future__ import annotations

import math

from ..detectors import SHEWHART
from .result import CovertResult


def miss_probability(q: float, gamma: float) -> float:
    """Per-sample probability of no alarm during transmission, ``1 - gamma^(-1/(1+q))``."""
    return -math.expm1(-math.log(gamma) / (1.0 + q))


def covert_prob_shewhart(q: float, L: int, gamma: float, nu: float = 0) -> CovertResult:
    """``(1 - gamma^(-1/(1+q)))^L``.  ``nu`` is accepted for symmetry and ignored."""
    if not q > 0:
        raise ValueError(f"q must be > 0, got {q}")
    if not L >= 1:
        raise ValueError(f"L must be >= 1, got {L}")
    if not gamma > 1:
        raise ValueError(f"gamma must be > 1, got {gamma}")
    value = math.exp(L * math.log1p(-math.exp(-math.log(gamma) / (1.0 + q))))
    return CovertResult(value, SHEWHART, {"per_sample": miss_probability(q, gamma)})
