"""Throughput maximization under a covert-probability floor.

Maximize ``L ln(1 + q sigma_ratio)`` over ``(q, L)`` subject to
``Q_L(q) >= theta``.  Shewhart has a closed form per ``L`` and a cheap
approximate optimum.  CUSUM and SR use a grid search over ``q`` in which
``L`` grows from 1 until the constraint fails, reusing the recursion state
between consecutive ``L`` and across thresholds ``theta``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationError, threshold_for
from .covert.cusum import AUTO, cusum_model
from .covert.shewhart import covert_prob_shewhart, miss_probability
from .covert.sr import DEFAULT_N, LINEAR, build_sr_grid, stieltjes
from .detectors import CUSUM, SHEWHART, SR, TESTS, SrThresholdError, check_sr_threshold
from .montecarlo import thread_count

log = logging.getLogger(__name__)

EXHAUSTIVE = "exhaustive"
APPROX = "approx"
ALGORITHM1 = "algorithm1"
METHODS = (EXHAUSTIVE, APPROX, ALGORITHM1)

Q_MIN = 1e-3
Q_MAX = 2.0
DQ = 1e-3
L_CAP = 20000


class InfeasibleError(ValueError):
    """No ``(q, L)`` pair meets the covert-probability floor."""


@dataclass
class Optimum:
    q_star: float
    l_star: int
    i_star: float
    feasible: bool
    method: str
    test: str = SHEWHART
    trace: list[tuple[float, int, float, float]] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def infeasible(cls, method: str, test: str, reason: str, **diag) -> "Optimum":
        return cls(0.0, 0, 0.0, False, method, test, [], {"reason": reason, **diag})


def utility(q: float, L: float, sigma_ratio: float = 1.0) -> float:
    """Information bound in nats."""
    if q < 0 or L < 1:
        raise ValueError("need q >= 0 and L >= 1")
    return L * math.log1p(q * sigma_ratio)


# --- Shewhart -----------------------------------------------------------------

def shewhart_feasible(gamma: float, theta: float) -> bool:
    """Some ``(q, L)`` meets the floor iff ``theta < 1 - 1/gamma``."""
    return theta < 1.0 - 1.0 / gamma


def lmax_shewhart(gamma: float, theta: float) -> int:
    if not shewhart_feasible(gamma, theta):
        raise InfeasibleError(f"theta={theta} >= 1 - 1/gamma = {1 - 1 / gamma}")
    return max(1, math.floor(math.log(theta) / math.log1p(-1.0 / gamma) + 1e-12))


def optimal_q_for_L_shewhart(L: int, gamma: float, theta: float) -> float:
    """Power that makes the floor active at duration ``L``."""
    lmax = lmax_shewhart(gamma, theta)
    if L > lmax:
        raise InfeasibleError(f"L={L} exceeds L_max={lmax}")
    per_sample_alarm = -math.expm1(math.log(theta) / L)
    return max(0.0, -1.0 - math.log(gamma) / math.log(per_sample_alarm))


def shewhart_duration(q: float, gamma: float, theta: float) -> int:
    """Longest ``L`` meeting the floor at power ``q`` (may be 0)."""
    return math.floor(math.log(theta) / math.log(miss_probability(q, gamma)) + 1e-12)


def exhaustive_shewhart(gamma: float, theta: float, sigma_ratio: float = 1.0) -> Optimum:
    try:
        lmax = lmax_shewhart(gamma, theta)
    except InfeasibleError as exc:
        return Optimum.infeasible(EXHAUSTIVE, SHEWHART, str(exc), bound=1.0 - 1.0 / gamma)
    best = None
    trace = []
    for L in range(1, lmax + 1):
        q = optimal_q_for_L_shewhart(L, gamma, theta)
        i = utility(q, L, sigma_ratio)
        trace.append((q, L, covert_prob_shewhart(q, L, gamma).value if q > 0 else 1.0, i))
        if best is None or i > best[2]:
            best = (q, L, i)
    q, L, i = best
    return Optimum(q, L, i, q > 0, EXHAUSTIVE, SHEWHART, trace, {"L_max": lmax})


def approx_roots(gamma: float) -> tuple[float, float] | None:
    """Stationary points ``u1 < u2`` of the large-gamma utility surrogate, if real."""
    b = 2.0 - math.log(gamma)
    disc = b * b - 4.0
    if disc < 0:
        return None
    r = math.sqrt(disc)
    return (-b - r) / 2.0, (-b + r) / 2.0


def approx_shewhart(gamma: float, theta: float, sigma_ratio: float = 1.0) -> Optimum:
    roots = approx_roots(gamma)
    if roots is None:
        log.info("no real root for gamma=%g; using the exhaustive search", gamma)
        opt = exhaustive_shewhart(gamma, theta, sigma_ratio)
        opt.diagnostics["fallback"] = "complex root"
        return opt
    u1, u2 = roots
    if not shewhart_feasible(gamma, theta):
        return Optimum.infeasible(APPROX, SHEWHART, "theta >= 1 - 1/gamma", u1=u1, u2=u2)
    L = shewhart_duration(u1, gamma, theta)
    if L < 1:
        # the rough power admits no duration; the shortest one is still feasible
        L = 1
    q = optimal_q_for_L_shewhart(L, gamma, theta)
    i = utility(q, L, sigma_ratio)
    return Optimum(q, L, i, q > 0, APPROX, SHEWHART, [(q, L, covert_prob_shewhart(q, L, gamma).value, i)],
                   {"u1": u1, "u2": u2, "q_tilde": u1})


# --- grid search -----------------------------------------------------------------

class CovertSequence:
    """``Q_1(q), Q_2(q), ...`` for one test, power and change point."""

    def __init__(self, test: str, q: float, gamma: float, n_grid: int = DEFAULT_N, engine: str = AUTO):
        self.test, self.q, self.gamma = test, q, gamma
        self.threshold = threshold_for(test, gamma, q)
        if test == CUSUM:
            self.model = cusum_model(q, self.threshold, engine)
        elif test == SR:
            self.grid = build_sr_grid(n_grid, q, self.threshold, LINEAR)

    def value(self, L: int, nu: int) -> float:
        if self.test == SHEWHART:
            return covert_prob_shewhart(self.q, L, self.gamma).value
        if self.test == CUSUM:
            return self.model.covert_prob(L, nu).value
        if nu == 0:
            return self.grid.q_at_zero(L)
        return min(max(stieltjes(self.grid.t_n(L), self.grid.g_n(nu)), 0.0), 1.0)

    def q_one_bound(self, nu: int) -> float:
        """Largest floor any duration can meet (the one-sample covert probability)."""
        return self.value(1, nu)

    def curve(self, nu: int, theta_min: float, l_cap: int = L_CAP) -> list[float]:
        """Values from ``L = 1`` up to and including the first one below ``theta_min``."""
        out = []
        for L in range(1, l_cap + 1):
            v = self.value(L, nu)
            out.append(v)
            if v < theta_min:
                return out
        log.warning("%s q=%g nu=%d: Q_L stayed >= %g up to the cap L=%d", self.test, self.q, nu, theta_min, l_cap)
        return out


def q_grid(q_min: float, q_max: float, dq: float) -> np.ndarray:
    if not (q_min > 0 and dq > 0 and q_max > q_min):
        raise ValueError("need q_min > 0, dq > 0 and q_max > q_min")
    n = int(math.floor((q_max - q_min) / dq + 1e-9))
    return np.round(q_min + dq * np.arange(n + 1), 12)


def _scan_one(test, q, gamma, nus, theta_min, l_cap, n_grid, engine):
    if test == SR:
        try:
            check_sr_threshold(gamma / (1.0 + q), q)
        except SrThresholdError:
            log.info("skipping q=%g: SR threshold below 1/q at gamma=%g", q, gamma)
            return None
    try:
        seq = CovertSequence(test, float(q), gamma, n_grid, engine)
    except CalibrationError as exc:
        log.warning("skipping q=%g: %s", q, exc)
        return None
    return {nu: seq.curve(nu, theta_min, l_cap) for nu in nus}


@dataclass
class CurveScan:
    """Covert-probability sequences on a power grid, one per change point.

    Each sequence runs from ``L = 1`` to the first value below ``theta_min``,
    which is all any floor ``theta >= theta_min`` needs.
    """

    test: str
    gamma: float
    qs: np.ndarray
    theta_min: float
    curves: list[dict[int, list[float]] | None]
    q_range: tuple[float, float, float]

    def optimum(self, nu: int, theta: float, sigma_ratio: float = 1.0) -> Optimum:
        """Best grid pair; ties go to the smaller ``q`` and then the smaller ``L``."""
        if theta < self.theta_min:
            raise ValueError(f"scan only resolves theta >= {self.theta_min}")
        best = None
        trace = []
        for q, cq in zip(self.qs, self.curves):
            if cq is None:
                continue
            for L, v in enumerate(cq[nu], start=1):
                i = utility(float(q), L, sigma_ratio)
                trace.append((float(q), L, v, i))
                if v < theta:
                    break
                if best is None or i > best[2]:
                    best = (float(q), L, i)
        if best is None:
            opt = Optimum.infeasible(ALGORITHM1, self.test, "no grid point meets theta", nu=nu, theta=theta)
            opt.trace = trace
            return opt
        return Optimum(best[0], best[1], best[2], True, ALGORITHM1, self.test, trace,
                       {"q_grid": self.q_range, "nu": nu, "theta": theta, "gamma": self.gamma})


def scan_curves(
    test: str,
    nus,
    theta_min: float,
    gamma: float,
    q_min: float = Q_MIN,
    q_max: float = Q_MAX,
    dq: float = DQ,
    l_cap: int = L_CAP,
    n_grid: int = DEFAULT_N,
    engine: str = AUTO,
    threads: int | None = None,
) -> CurveScan:
    """Calibrate each grid power once and grow its sequences for every ``nu``."""
    if test not in (CUSUM, SR):
        raise ValueError(f"grid search covers cusum and sr, got {test!r}")
    if not 0 < theta_min < 1:
        raise ValueError("theta must lie in (0, 1)")
    nus = [int(n) for n in nus]
    qs = q_grid(q_min, q_max, dq)
    threads = thread_count() if threads is None else threads

    def work(q):
        return _scan_one(test, q, gamma, nus, theta_min, l_cap, n_grid, engine)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            curves = list(pool.map(work, qs))
    else:
        curves = [work(q) for q in qs]
    return CurveScan(test, gamma, qs, theta_min, curves, (q_min, q_max, dq))


def algorithm1_sweep(
    test: str,
    nus,
    thetas,
    gamma: float,
    sigma_ratio: float = 1.0,
    q_min: float = Q_MIN,
    q_max: float = Q_MAX,
    dq: float = DQ,
    **kw,
) -> dict[tuple[int, float], Optimum]:
    """Grid search for several change points and floors, sharing one scan."""
    thetas = [float(t) for t in thetas]
    scan = scan_curves(test, nus, min(thetas), gamma, q_min, q_max, dq, **kw)
    return {(int(nu), th): scan.optimum(int(nu), th, sigma_ratio) for nu in nus for th in thetas}


def algorithm1(
    test: str,
    nu: int,
    theta: float,
    gamma: float,
    sigma_ratio: float = 1.0,
    q_min: float = Q_MIN,
    q_max: float = Q_MAX,
    dq: float = DQ,
    **kw,
) -> Optimum:
    return algorithm1_sweep(test, [nu], [theta], gamma, sigma_ratio, q_min, q_max, dq, **kw)[(int(nu), float(theta))]


def optimize(test: str, method: str, gamma: float, theta: float, sigma_ratio: float = 1.0, nu: int = 0, **kw) -> Optimum:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if method in (EXHAUSTIVE, APPROX):
        if test != SHEWHART:
            raise ValueError(f"method {method!r} applies to the Shewhart test only")
        return (exhaustive_shewhart if method == EXHAUSTIVE else approx_shewhart)(gamma, theta, sigma_ratio)
    return algorithm1(test, nu, theta, gamma, sigma_ratio, **kw)


# --- feasibility --------------------------------------------------------------

@dataclass(frozen=True)
class FeasibilityReport:
    test: str
    q: float
    nu: int
    gamma: float
    bound_on_one_minus_theta: float
    theta_below_false_alarm_cap: bool | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def max_theta(self) -> float:
        """No ``(q, L)``-system at this ``q`` is covert above this floor."""
        return 1.0 - self.bound_on_one_minus_theta

    def admits(self, theta: float) -> bool:
        return theta <= self.max_theta


def feasibility_check(
    test: str, q: float, nu: int, gamma: float, theta: float | None = None, n_grid: int = DEFAULT_N
) -> FeasibilityReport:
    """Necessary condition: the one-sample covert probability must reach ``theta``.

    The returned bound is the probability of alarming on the first
    transmitted sample, computed from the statistic's law at ``nu``.
    """
    if test == SHEWHART:
        bound = 1.0 - miss_probability(q, gamma)
        cor1 = None if theta is None else shewhart_feasible(gamma, theta)
        return FeasibilityReport(test, q, nu, gamma, bound, cor1, {})
    thr = threshold_for(test, gamma, q)
    if test == CUSUM:
        model = cusum_model(q, thr)
        s = 1.0 / (1.0 + q)
        mean_exp = model.expectation(nu, lambda x: np.exp(s * np.asarray(x)))
        u_c = mean_exp * math.exp(-(model.omega + thr) * s)
        return FeasibilityReport(test, q, nu, gamma, u_c, None, {"U_c": u_c, "E_exp": mean_exp})
    if test == SR:
        f = lambda x: np.exp(np.log((1.0 + np.asarray(x)) / ((1.0 + q) * thr)) / q)
        if nu == 0:
            u_r = float(f(0.0))
        else:
            grid = build_sr_grid(n_grid, q, thr, LINEAR)
            u_r = stieltjes(f(grid.nodes), grid.g_n(nu))
        return FeasibilityReport(test, q, nu, gamma, u_r, None, {"U_r": u_r})
    raise ValueError(f"unknown test {test!r}")
