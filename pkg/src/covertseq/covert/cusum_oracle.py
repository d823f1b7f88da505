"""Direct numerical iteration of the CUSUM integral recursions.

This is the reference the coefficient tables are checked against.  Each
function ``Q_n`` / ``G_n`` is stored by its values at Chebyshev points on
pieces whose edges are the union of ``{k omega}`` and ``{eta - k omega}``;
both families are smooth inside every such piece, so barycentric
interpolation plus Gauss-Legendre integration converge spectrally.  The atom
of ``C_hat`` at zero is carried explicitly as the CDF value at ``x = 0``.
"""

from __future__ import annotations

import math

import numpy as np

from ..chebyshev import PiecewiseCheb, integral_matrix
from ..signal_model import cusum_drift


def breakpoints(eta_hat_c: float, omega: float) -> np.ndarray:
    k = np.arange(0, math.ceil(eta_hat_c / omega) + 1)
    pts = np.concatenate([k * omega, eta_hat_c - k * omega, [0.0, eta_hat_c]])
    pts = pts[(pts >= 0) & (pts <= eta_hat_c)]
    pts = np.unique(np.round(pts, 13))
    # merge near-duplicates to avoid degenerate pieces
    keep = np.concatenate([[True], np.diff(pts) > 1e-9 * max(1.0, eta_hat_c)])
    return pts[keep]


class CusumIntegralOracle:
    """Iterates ``Q_n`` (post-change survival) and ``G_n`` (pre-change CDF) numerically."""

    def __init__(self, q: float, eta_hat_c: float, order: int = 24):
        self.q = q
        self.eta = eta_hat_c
        self.omega = cusum_drift(q)
        self.order = order
        self.edges = breakpoints(eta_hat_c, self.omega)
        self._nodes = PiecewiseCheb.nodes(self.edges, order)
        s = 1.0 / (1.0 + q)
        eta, w = self.eta, self.omega
        self.Q = [PiecewiseCheb.from_function(lambda x: 1 - np.exp(-(eta + w - x) * s), self.edges, order)]
        norm1 = -math.expm1(-(eta + w))
        self.G = [PiecewiseCheb.from_function(lambda x: -np.expm1(-(x + w)) / norm1, self.edges, order)]
        self.norms = [norm1]
        self.converged_at: int | None = None
        self.tol = 1e-8

    def _operators(self) -> None:
        """Both one-step maps are linear in the nodal values; assemble them once."""
        if hasattr(self, "_q_op"):
            return
        s = 1.0 / (1.0 + self.q)
        eta, w, order = self.eta, self.omega, self.order
        x = self._nodes.ravel()
        tail = integral_matrix(self.edges, order, [eta], -s) - integral_matrix(self.edges, order, np.maximum(x - w, 0.0), -s)
        self._q_op = s * np.exp(s * (x - w))[:, None] * tail
        reset = x < w
        self._q_op[reset, 0] -= np.expm1(s * (x[reset] - w))
        self._g_op = np.exp(-(x + w))[:, None] * integral_matrix(self.edges, order, np.minimum(x + w, eta), 1.0)
        self._g_const = np.where(x >= eta - w, -np.expm1(-np.maximum(x + w - eta, 0.0)), 0.0)

    def _next_q(self, Qn: PiecewiseCheb) -> PiecewiseCheb:
        self._operators()
        out = self._q_op @ Qn.values.ravel()
        return PiecewiseCheb(self.edges, self.order, out.reshape(self._nodes.shape))

    def _next_g(self, Gn: PiecewiseCheb) -> PiecewiseCheb:
        self._operators()
        tilde = (self._g_op @ Gn.values.ravel() + self._g_const).reshape(self._nodes.shape)
        top = tilde[-1, -1]  # last node is eta itself
        self.norms.append(top)
        return PiecewiseCheb(self.edges, self.order, tilde / top)

    def q_fn(self, n: int) -> PiecewiseCheb:
        while len(self.Q) < n:
            self.Q.append(self._next_q(self.Q[-1]))
        return self.Q[n - 1]

    def g_fn(self, n: int) -> PiecewiseCheb:
        """``G_n``; past the convergence horizon the converged function is reused."""
        while len(self.G) < n and self.converged_at is None:
            self.G.append(self._next_g(self.G[-1]))
            k = len(self.G)
            if np.max(np.abs(self.G[-1].values - self.G[-2].values)) < self.tol and k > self.omega_pieces:
                self.converged_at = k
        return self.G[min(n, len(self.G)) - 1]

    @property
    def omega_pieces(self) -> int:
        return max(1, math.ceil(self.eta / self.omega - 1e-12))

    def g_density(self, n: int, x) -> np.ndarray:
        """Density of the continuous part of ``G_n`` for ``x`` in ``(0, eta)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if n == 1:
            return np.exp(-(x + self.omega)) / self.norms[0]
        self.g_fn(n)
        n = min(n, len(self.G))
        prev = self.G[n - 2](np.minimum(x + self.omega, self.eta))
        return prev / self.norms[n - 1] - self.G[n - 1](x)

    def q_n(self, n: int, x) -> np.ndarray:
        return self.q_fn(n)(x)

    def g_n(self, n: int, x) -> np.ndarray:
        return self.g_fn(n)(x)


def integral_oracle_cusum(n: int, q: float, eta_hat_c: float, order: int = 24) -> CusumIntegralOracle:
    """Oracle with ``Q_1..Q_n`` and ``G_1..G_n`` already computed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    orc = CusumIntegralOracle(q, eta_hat_c, order)
    orc.q_fn(n)
    orc.g_fn(n)
    return orc


def self_convergence(q: float, eta_hat_c: float, n: int, order: int = 24, points: int = 50, seed: int = 0) -> float:
    """Max change of the oracle values when the resolution is roughly doubled."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, eta_hat_c, points)
    a = integral_oracle_cusum(n, q, eta_hat_c, order)
    b = integral_oracle_cusum(n, q, eta_hat_c, 2 * order - 1)
    return float(max(np.max(np.abs(a.q_n(n, x) - b.q_n(n, x))), np.max(np.abs(a.g_n(n, x) - b.g_n(n, x)))))
