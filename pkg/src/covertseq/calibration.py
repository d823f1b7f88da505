"""Detection thresholds that give an average run length to false alarm of gamma.

Shewhart and SR thresholds have closed forms.  The CUSUM run length
``phi(x) = E_inf[T | C_hat_0 = x]`` is piecewise ``poly * exp`` on the grid of
multiples of ``omega``; it is evaluated from the ``c_n`` coefficient recursion
and ``phi(0)`` is then fixed by the renewal equation at ``x = 0``, which is
linear in ``phi(0)``.  :func:`cusum_arl_renewal` solves the same renewal
equation by direct discretization and serves as the independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .chebyshev import PiecewiseCheb, integral_matrix
from .detectors import check_sr_threshold
from .signal_model import cusum_drift

MAX_PIECES = 400
BISECTION_RTOL = 1e-6
MAX_BRACKET_DOUBLINGS = 60
# above this value of omega + eta_hat_c the closed form for phi(0) cancels too
# many digits (it multiplies a tiny remainder by e^(omega+eta)); the
# collocation solver of the renewal equation is used instead
CLOSED_FORM_MAX_EXPONENT = 20.0


class CalibrationError(RuntimeError):
    pass


# --- Shewhart -----------------------------------------------------------------

def calibrate_shewhart(gamma: float) -> float:
    """Power threshold ``eta_s'`` with false-alarm probability ``1/gamma`` per sample."""
    if not gamma > 1:
        raise CalibrationError(f"gamma must be > 1, got {gamma}")
    return math.log(gamma)


def shewhart_lr_threshold(eta_s_prime: float, q: float) -> float:
    return math.exp(q * eta_s_prime / (1.0 + q)) / (1.0 + q)


# --- SR -----------------------------------------------------------------------

@dataclass(frozen=True)
class SrArlSolution:
    eta_r: float
    q: float

    @property
    def arl_at_zero(self) -> float:
        return sr_arl(0.0, self.eta_r, self.q)


def sr_arl(x: float, eta_r: float, q: float) -> float:
    """Run length to false alarm of SR started from ``R_0 = x`` (requires eta_r >= 1/q)."""
    check_sr_threshold(eta_r, q)
    return 1.0 + (1.0 + q) * (eta_r - (1.0 + x) / (1.0 + q))


def calibrate_sr(gamma: float, q: float) -> SrArlSolution:
    if not gamma > 1:
        raise CalibrationError(f"gamma must be > 1, got {gamma}")
    eta_r = gamma / (1.0 + q)
    try:
        check_sr_threshold(eta_r, q)
    except ValueError as exc:
        raise CalibrationError(f"gamma={gamma} too small for q={q}: {exc}") from exc
    return SrArlSolution(eta_r, q)


# --- CUSUM --------------------------------------------------------------------

def cusum_pieces(eta_hat_c: float, omega: float) -> int:
    m = max(1, math.ceil(eta_hat_c / omega - 1e-12))
    if m > MAX_PIECES:
        raise CalibrationError(f"eta_hat_c/omega = {eta_hat_c / omega:.1f} exceeds {MAX_PIECES} pieces")
    return m


@lru_cache(maxsize=64)
def _c_coeffs(omega: float, m: int) -> tuple[float, ...]:
    c = [-1.0]
    for n in range(1, m):
        acc = [-1.0, (-1) ** n * math.exp(n * math.log(omega) - math.lgamma(n + 1))]
        for k in range(1, n):
            acc.append(
                (-1) ** k
                * (c[n - 1 - k] - c[n - k])
                * math.exp(k * math.log((n - k + 1) * omega) - math.lgamma(k + 1) + (n - k) * omega)
            )
        c.append(c[n - 1] + math.exp(-n * omega) * math.fsum(acc))
    return tuple(c)


def c_coefficients(eta_hat_c: float, omega: float) -> tuple[float, ...]:
    """Coefficients ``c_0 .. c_{M-1}`` of the piecewise run-length formula."""
    return _c_coeffs(omega, cusum_pieces(eta_hat_c, omega))


def cusum_arl_increment(x, eta_hat_c: float, omega: float, c=None):
    """``phi(x) - phi(0)``; independent of ``phi(0)``."""
    if c is None:
        c = c_coefficients(eta_hat_c, omega)
    shape = np.shape(x)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0) or np.any(x >= eta_hat_c):
        raise ValueError("x must lie in [0, eta_hat_c)")
    n = np.minimum((x // omega).astype(int), len(c) - 1)
    out = 1.0 + n.astype(float)
    for m in range(len(c)):
        active = n >= m
        if not np.any(active):
            break
        xm = x[active]
        nm = n[active]
        coef = np.array(c)[nm - m] * (-1) ** m
        base = xm - (m - 1) * omega
        out[active] += coef * base**m / math.factorial(m) * np.exp(xm - m * omega)
    return out.reshape(shape)


def cusum_phi(x, eta_hat_c: float, omega: float, phi0: float, c=None):
    """Run length to false alarm started from ``C_hat_0 = x``."""
    return phi0 + cusum_arl_increment(x, eta_hat_c, omega, c)


@dataclass(frozen=True)
class CusumArlSolution:
    phi0: float
    c_coeffs: tuple[float, ...]
    eta_hat_c: float
    omega: float

    def phi(self, x):
        return cusum_phi(x, self.eta_hat_c, self.omega, self.phi0, self.c_coeffs)


def _gauss_on_pieces(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * t + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


def omega_edges(eta_hat_c: float, omega: float) -> np.ndarray:
    m = cusum_pieces(eta_hat_c, omega)
    return np.append(np.arange(m) * omega, eta_hat_c)


def solve_phi0(eta_hat_c: float, omega: float, order: int = 24) -> CusumArlSolution:
    """Solve the renewal equation at zero for ``phi(0)``.

    With ``phi = phi(0) + g`` the equation
    ``phi(0) = 1 + phi(0) (1 - e^-omega) + int_0^eta e^-(omega+y) phi(y) dy``
    gives ``phi(0) = e^(omega+eta) (1 + e^-omega int_0^eta g(y) e^-y dy)``.
    The integral uses Gauss-Legendre on each omega-piece, where ``g`` is smooth.
    """
    if not eta_hat_c > 0:
        raise CalibrationError(f"eta_hat_c must be > 0, got {eta_hat_c}")
    c = c_coefficients(eta_hat_c, omega)
    nodes, weights = _gauss_on_pieces(omega_edges(eta_hat_c, omega), order)
    nodes = np.minimum(nodes, np.nextafter(eta_hat_c, 0))
    integral = math.fsum(weights * cusum_arl_increment(nodes, eta_hat_c, omega, c) * np.exp(-nodes))
    phi0 = math.exp(omega + eta_hat_c) * (1.0 + math.exp(-omega) * integral)
    if not math.isfinite(phi0) or phi0 < 1:
        raise CalibrationError(f"non-finite or invalid phi(0)={phi0} at eta_hat_c={eta_hat_c}")
    return CusumArlSolution(phi0, c, eta_hat_c, omega)


def cusum_arl(eta_hat_c: float, q: float) -> float:
    """``phi(0)`` by the closed form when well conditioned, else by collocation."""
    omega = cusum_drift(q)
    if omega + eta_hat_c <= CLOSED_FORM_MAX_EXPONENT:
        return solve_phi0(eta_hat_c, omega).phi0
    return cusum_arl_collocation(eta_hat_c, omega)


@lru_cache(maxsize=4096)
def calibrate_cusum(gamma: float, q: float, rtol: float = BISECTION_RTOL) -> float:
    """Scaled threshold ``eta_hat_c`` whose run length to false alarm is ``gamma``."""
    if not gamma > 1:
        raise CalibrationError(f"gamma must be > 1, got {gamma}")
    if not q > 0:
        raise CalibrationError(f"q must be > 0, got {q}")
    omega = cusum_drift(q)

    def f(eta: float) -> float:
        return cusum_arl(eta, q) - gamma

    lo, hi = omega / 2, 2 * omega
    for _ in range(MAX_BRACKET_DOUBLINGS):
        if f(lo) <= 0:
            break
        lo /= 2
    else:
        raise CalibrationError("could not bracket from below")
    for _ in range(MAX_BRACKET_DOUBLINGS):
        if f(hi) >= 0:
            break
        lo, hi = hi, 2 * hi
    else:
        raise CalibrationError("could not bracket from above")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = f(mid)
        if abs(val) <= rtol * gamma:
            return mid
        if val < 0:
            lo = mid
        else:
            hi = mid
    raise CalibrationError("bisection did not converge")


# --- independent check: discretized renewal equation -------------------------

def _hat_exp_weights(left, right, lower):
    """Integrals of ``e^-y`` times the two linear hat pieces over ``[max(l, lower), r]``."""
    d = right - left
    a = np.maximum(left, lower)
    ea, er = np.exp(-a), np.exp(-right)
    i0 = ea - er  # int e^-y
    i1 = (a + 1) * ea - (right + 1) * er  # int y e^-y
    w_right = (i1 - left * i0) / d
    w_left = (right * i0 - i1) / d
    return w_left, w_right


def cusum_arl_renewal(eta_hat_c: float, omega: float, per_omega: int = 200, extrapolate: bool = True) -> float:
    """``phi(0)`` from a product-trapezoid discretization of the renewal equation.

    ``phi(x) = 1 + phi(0) P(reset | x) + int_{(x-omega)^+}^{eta} phi(y) e^{-(y-x+omega)} dy``
    is discretized on a uniform grid whose step divides ``omega`` (so the lower
    limit ``x - omega`` is always a node), with ``phi`` linear between nodes and
    the exponential weight integrated exactly.  Richardson extrapolation over
    two step sizes removes the leading O(h^2) error.
    """
    def solve(m: int) -> float:
        h = omega / m
        nodes = np.arange(0.0, eta_hat_c, h)
        if eta_hat_c - nodes[-1] < 1e-6 * h:
            nodes = nodes[:-1]
        nodes = np.append(nodes, eta_hat_c)
        n = len(nodes)
        left, right = nodes[:-1], nodes[1:]
        a = np.eye(n)
        for i, x in enumerate(nodes):
            lower = max(0.0, x - omega)
            first = max(0, int(np.searchsorted(nodes, lower, side="right")) - 1)
            wl, wr = _hat_exp_weights(left[first:], right[first:], lower)
            fac = math.exp(x - omega)
            a[i, first:n - 1] -= fac * wl
            a[i, first + 1:n] -= fac * wr
            if x < omega:
                a[i, 0] += math.expm1(x - omega)
        return float(np.linalg.solve(a, np.ones(n))[0])

    if not extrapolate:
        return solve(per_omega)
    coarse, fine = solve(per_omega), solve(2 * per_omega)
    return fine + (fine - coarse) / 3.0


def cusum_arl_collocation(eta_hat_c: float, omega: float, order: int = 16) -> float:
    """``phi(0)`` by Chebyshev collocation of the renewal equation on the omega-pieces.

    ``phi`` is smooth inside each piece, so the error decays spectrally with
    ``order``; unlike the closed form this never forms ``e^(omega+eta)``.
    """
    if not eta_hat_c > 0:
        raise CalibrationError(f"eta_hat_c must be > 0, got {eta_hat_c}")
    edges = omega_edges(eta_hat_c, omega)
    x = PiecewiseCheb.nodes(edges, order).ravel()
    lower = np.maximum(x - omega, 0.0)
    tail = integral_matrix(edges, order, [eta_hat_c], -1.0) - integral_matrix(edges, order, lower, -1.0)
    a = np.eye(x.size) - np.exp(x - omega)[:, None] * tail
    reset = x < omega
    a[reset, 0] += np.expm1(x[reset] - omega)
    phi0 = float(np.linalg.solve(a, np.ones(x.size))[0])
    if not math.isfinite(phi0) or phi0 < 1:
        raise CalibrationError(f"non-finite or invalid phi(0)={phi0} at eta_hat_c={eta_hat_c}")
    return phi0


def threshold_for(test: str, gamma: float, q: float) -> float:
    """Calibrated threshold of ``test``: ``eta_s'``, ``eta_hat_c`` or ``eta_r``."""
    from .detectors import CUSUM, SHEWHART, SR

    if test == SHEWHART:
        return calibrate_shewhart(gamma)
    if test == CUSUM:
        return calibrate_cusum(float(gamma), float(q))
    if test == SR:
        return calibrate_sr(gamma, q).eta_r
    raise ValueError(f"unknown test {test!r}")
