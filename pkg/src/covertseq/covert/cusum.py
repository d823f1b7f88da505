"""CUSUM covert probability.

With ``G_nu`` the law of ``C_hat_nu`` given no alarm by ``nu`` (an atom at 0
plus a density) and ``Q_L(x)`` the probability of ``L`` quiet post-change
steps from ``x``::

    Q_L = Q_L(0) * atom_nu + int_0^eta Q_L(x) g_nu(x) dx

The integral runs Gauss-Legendre on pieces cut at ``k omega`` and
``eta - k omega``, where both factors are smooth.

Two engines provide ``Q_n`` and ``G_n``: the piecewise coefficient tables
(fast, exact up to rounding) and the Chebyshev integral oracle.  The tables
lose digits once the threshold spans many omega-pieces, so above
``TABLE_MAX_PIECES`` and whenever the startup self-test fails the oracle is
used instead.
"""

from __future__ import annotations

import logging
from functools import lru_cache

import numpy as np

from ..calibration import cusum_pieces
from ..detectors import CUSUM
from ..signal_model import POST, PRE, cusum_drift
from .cusum_oracle import CusumIntegralOracle, breakpoints
from .cusum_tables import CusumCoeffA, CusumCoeffV, build_a_tables, build_v_tables
from .result import CovertResult

log = logging.getLogger(__name__)

TABLES = "tables"
ORACLE = "oracle"
AUTO = "auto"
ENGINES = (TABLES, ORACLE, AUTO)

TABLE_MAX_PIECES = 18
SELF_TEST_CASES = ((0.15, 500.0), (0.5, 200.0))
SELF_TEST_DEPTH = 10
SELF_TEST_TOL = 1e-6
CLAMP_LOG_TOL = 1e-9
GAUSS_ORDER = 24


def cusum_cond_cdf(x, u: float, q: float, phase: str):
    """``P(C_hat_{t+1} <= x | C_hat_t = u)`` in the given phase."""
    if u < 0:
        raise ValueError("u must be >= 0")
    if phase == POST:
        rate = 1.0 / (1.0 + q)
    elif phase == PRE:
        rate = 1.0
    else:
        raise ValueError(f"unknown phase {phase!r}")
    omega = cusum_drift(q)
    x = np.asarray(x, dtype=float)
    inside = x >= max(u - omega, 0.0)
    out = np.where(inside, -np.expm1(-np.maximum(omega - u + x, 0.0) * rate), 0.0)
    return float(out) if out.ndim == 0 else out


def _clamp(values: np.ndarray, what: str) -> np.ndarray:
    excess = np.max(np.maximum(values - 1.0, 0.0) + np.maximum(-values, 0.0), initial=0.0)
    if excess > CLAMP_LOG_TOL:
        log.warning("%s outside [0, 1] by %.2e; clamped", what, excess)
    return np.clip(values, 0.0, 1.0)


def eval_q_cusum(n: int, x, q: float, tables: CusumCoeffV) -> np.ndarray:
    if abs(q - tables.q) > 1e-12 * max(1.0, q):
        raise ValueError("q does not match the tables")
    return _clamp(tables.q_n(n, x, clip=False), f"Q_{n}")


def eval_g_cusum(nu: int, x, q: float, tables: CusumCoeffA) -> np.ndarray:
    if abs(q - tables.q) > 1e-12 * max(1.0, q):
        raise ValueError("q does not match the tables")
    return _clamp(tables.g(nu, x), f"G_{nu}")


@lru_cache(maxsize=1)
def table_self_test() -> tuple[bool, float]:
    """Compare tables with the oracle for ``n <= 10`` at reference operating points."""
    from ..calibration import calibrate_cusum

    rng = np.random.default_rng(20240601)
    worst = 0.0
    for q, gamma in SELF_TEST_CASES:
        eta = calibrate_cusum(gamma, q)
        v = build_v_tables(SELF_TEST_DEPTH, q, eta)
        a = build_a_tables(SELF_TEST_DEPTH, q, eta)
        orc = CusumIntegralOracle(q, eta)
        for n in range(1, SELF_TEST_DEPTH + 1):
            x = rng.uniform(0.0, eta, 50)
            worst = max(worst, float(np.max(np.abs(v.q_n(n, x) - orc.q_n(n, x)))))
            worst = max(worst, float(np.max(np.abs(a.g(n, x) - orc.g_n(n, x)))))
    ok = worst <= SELF_TEST_TOL
    if not ok:
        log.error("coefficient tables disagree with the integral oracle (%.2e); using the oracle", worst)
    return ok, worst


class CusumCovertModel:
    """``Q_n`` and ``G_n`` for one ``(q, eta_hat_c)``, grown on demand."""

    def __init__(self, q: float, eta_hat_c: float, engine: str = AUTO):
        if engine not in ENGINES:
            raise ValueError(f"unknown engine {engine!r}")
        self.q = q
        self.eta_hat_c = eta_hat_c
        self.omega = cusum_drift(q)
        self.M = cusum_pieces(eta_hat_c, self.omega)
        if engine == AUTO:
            if self.M > TABLE_MAX_PIECES:
                log.info("M=%d > %d pieces; using the integral oracle", self.M, TABLE_MAX_PIECES)
                engine = ORACLE
            else:
                engine = TABLES if table_self_test()[0] else ORACLE
        self.engine = engine
        if engine == TABLES:
            self.v = build_v_tables(1, q, eta_hat_c)
            self.a = build_a_tables(1, q, eta_hat_c)
        else:
            self.oracle = CusumIntegralOracle(q, eta_hat_c)
        edges = breakpoints(eta_hat_c, self.omega)
        t, w = np.polynomial.legendre.leggauss(GAUSS_ORDER)
        lo, hi = edges[:-1, None], edges[1:, None]
        self.nodes = (0.5 * (hi - lo) * t + 0.5 * (hi + lo)).ravel()
        self.weights = (0.5 * (hi - lo) * w).ravel()
        self._mix: dict[int, tuple[float, np.ndarray]] = {}

    @property
    def converged_at(self) -> int | None:
        return self.a.converged_at if self.engine == TABLES else self.oracle.converged_at

    def q_values(self, n: int, x) -> np.ndarray:
        if self.engine == TABLES:
            return eval_q_cusum(n, x, self.q, self.v)
        return _clamp(self.oracle.q_n(n, x), f"Q_{n}")

    def g_values(self, nu: int, x) -> np.ndarray:
        if self.engine == TABLES:
            return eval_g_cusum(nu, x, self.q, self.a)
        return _clamp(self.oracle.g_n(nu, x), f"G_{nu}")

    def atom(self, nu: int) -> float:
        if nu == 0:
            return 1.0
        return float(self.g_values(nu, 0.0)[0])

    def density(self, nu: int, x) -> np.ndarray:
        if self.engine == TABLES:
            return self.a.density(nu, x)
        return self.oracle.g_density(nu, x)

    def _mixing(self, nu: int) -> tuple[float, np.ndarray]:
        """Atom mass and quadrature weights times density for ``G_nu``."""
        conv = self.converged_at
        key = min(nu, conv) if conv is not None else nu
        if key not in self._mix:
            self._mix[key] = (self.atom(key), self.weights * self.density(key, self.nodes))
        return self._mix[key]

    def expectation(self, nu: int, f) -> float:
        """``E[f(C_hat_nu) | no alarm by nu]``."""
        if nu == 0:
            return float(np.asarray(f(np.zeros(1)))[0])
        atom, wd = self._mixing(nu)
        return atom * float(np.asarray(f(np.zeros(1)))[0]) + float(np.dot(wd, f(self.nodes)))

    def covert_prob(self, L: int, nu: int) -> CovertResult:
        if L < 1:
            raise ValueError(f"L must be >= 1, got {L}")
        if nu < 0 or int(nu) != nu:
            raise ValueError(f"nu must be a nonnegative integer, got {nu}")
        nu = int(nu)
        q0 = float(self.q_values(L, 0.0)[0])
        if nu == 0:
            value, atom = q0, 1.0
        else:
            atom, wd = self._mixing(nu)
            value = atom * q0 + float(np.dot(wd, self.q_values(L, self.nodes)))
        value = float(_clamp(np.array([value]), "Q_L^CU")[0])
        diag = {"engine": self.engine, "M": self.M, "depth": L, "atom": atom, "converged_at": self.converged_at}
        return CovertResult(value, CUSUM, diag)


@lru_cache(maxsize=16)
def cusum_model(q: float, eta_hat_c: float, engine: str = AUTO) -> CusumCovertModel:
    return CusumCovertModel(q, eta_hat_c, engine)


def covert_prob_cusum(q: float, L: int, nu: int, eta_hat_c: float, engine: str = AUTO) -> CovertResult:
    return cusum_model(q, eta_hat_c, engine).covert_prob(L, nu)
