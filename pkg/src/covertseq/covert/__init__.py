"""Analytic covert probabilities for the three tests."""

from .cusum import (
    CusumCovertModel,
    covert_prob_cusum,
    cusum_cond_cdf,
    cusum_model,
    eval_g_cusum,
    eval_q_cusum,
)
from .cusum_oracle import CusumIntegralOracle, integral_oracle_cusum
from .cusum_tables import CusumCoeffA, CusumCoeffV, build_a_tables, build_v_tables
from .result import CovertResult
from .shewhart import covert_prob_shewhart
from .sr import QuadGrid, build_sr_grid, covert_prob_sr, eval_g_sr, eval_q_sr, sr_cond_cdf

__all__ = [
    "CovertResult",
    "CusumCoeffA",
    "CusumCoeffV",
    "CusumCovertModel",
    "CusumIntegralOracle",
    "QuadGrid",
    "build_a_tables",
    "build_sr_grid",
    "build_v_tables",
    "covert_prob",
    "covert_prob_cusum",
    "covert_prob_shewhart",
    "covert_prob_sr",
    "cusum_cond_cdf",
    "cusum_model",
    "eval_g_cusum",
    "eval_g_sr",
    "eval_q_cusum",
    "eval_q_sr",
    "integral_oracle_cusum",
    "sr_cond_cdf",
]


def covert_prob(test: str, q: float, L: int, nu: int, gamma: float, **kw) -> CovertResult:
    """Covert probability of ``test`` calibrated to ``gamma``."""
    from ..calibration import threshold_for
    from ..detectors import CUSUM, SHEWHART, SR

    if test == SHEWHART:
        return covert_prob_shewhart(q, L, gamma, nu)
    thr = threshold_for(test, gamma, q)
    if test == CUSUM:
        return covert_prob_cusum(q, L, nu, thr, **kw)
    if test == SR:
        return covert_prob_sr(q, L, nu, thr, **kw)
    raise ValueError(f"unknown test {test!r}")
