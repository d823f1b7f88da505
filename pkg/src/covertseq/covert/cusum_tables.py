"""Piecewise closed forms for the CUSUM covert probability.

Two families of coefficient tables are built by forward recursion in ``n``:

* ``V`` tables give ``Q_n(x)``, the probability that ``n`` post-change steps
  started from ``C_hat = x`` stay below the threshold.  On the piece
  ``[(i-1) omega, i omega)`` it is a constant plus ``e^{x/(1+q)}`` times a
  polynomial of degree ``i - 1``.
* ``A`` tables give ``G_n(x)``, the CDF of ``C_hat_n`` under pure noise given
  no alarm by ``n``.  Pieces are counted down from the threshold,
  ``[eta - i omega, eta - (i-1) omega)``, with a constant minus ``e^{-x}``
  times a polynomial.  The value at ``x = 0`` is the atom ``P(C_hat_n = 0)``.

Tables are stored as dense ``(M+1, M+2)`` arrays indexed with the 1-based
``(i, j)`` of the formulas; row ``i`` uses columns ``1 .. i+1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..calibration import cusum_pieces
from ..signal_model import cusum_drift

MAX_DEPTH = 100_000


def _fact(l: int) -> float:
    return math.factorial(l)


@dataclass
class CusumCoeffV:
    q: float
    eta_hat_c: float
    omega: float
    M: int
    tables: list[np.ndarray] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.tables)

    # constants of the recursion
    @property
    def alpha(self) -> float:
        s = 1.0 / (1.0 + self.q)
        return s * math.exp(-s * self.omega)

    def beta(self, i: int) -> float:
        return math.exp(-i * self.omega / (1.0 + self.q))

    @property
    def beta_under(self) -> float:
        return math.exp(-self.eta_hat_c / (1.0 + self.q))

    def vartheta(self, a: int, b: int, l: int) -> float:
        w, eta = self.omega, self.eta_hat_c
        return ((a * w) ** l - (b * w - eta) ** l) / _fact(l)

    def psi(self, n: int) -> dict[int, float]:
        """Integral of ``Q_n(y) e^{-y/(1+q)}`` over each piece ``k``."""
        V = self.tables[n - 1]
        M, w, q = self.M, self.omega, self.q
        top = min(n, M)
        out = {}
        for k in range(1, top + 1):
            if k < top:
                terms = [(1 + q) * (self.beta(k - 1) - self.beta(k)) * V[k, 1]]
                terms += [V[k, l + 1] * w**l / _fact(l) for l in range(1, k + 1)]
            elif n <= M:
                terms = [(1 + q) * (self.beta(n - 1) - self.beta_under) * V[n, 1]]
                terms += [V[n, l + 1] * self.vartheta(l - n, l - 1, l) for l in range(1, n + 1)]
            else:
                terms = [(1 + q) * (self.beta(M - 1) - self.beta_under) * V[M, 1]]
                terms += [V[M, l + 1] * self.vartheta(1, M, l) for l in range(1, M + 1)]
            out[k] = math.fsum(terms)
        return out

    def extend(self, depth: int) -> "CusumCoeffV":
        if depth > MAX_DEPTH:
            raise OverflowError(f"table depth {depth} exceeds {MAX_DEPTH}")
        M, a = self.M, self.alpha
        while self.depth < depth:
            n = self.depth
            V = self.tables[-1]
            new = np.zeros((M + 1, M + 2))
            top = min(n, M)
            psi = self.psi(n)
            new[1, 1] = V[1, 1] + V[1, 2]
            for i in range(2, min(n + 1, M) + 1):
                new[i, 1] = V[i - 1, 1]
                new[i, 3 : i + 2] = a * V[i - 1, 2 : i + 1]
            for i in range(1, top + 1):
                new[i, 2] = -new[i, 1] * self.beta(i) + a * math.fsum(psi[k] for k in range(i, top + 1))
            if n < M:
                s = math.fsum(self.vartheta(0, k - 1, k) * V[n, k + 1] for k in range(1, n + 1))
                new[n + 1, 2] = -new[n + 1, 1] * self.beta(1) * self.beta_under + a * s
            self.tables.append(new)
        return self

    def q_n(self, n: int, x, clip: bool = True) -> np.ndarray:
        """``Q_n(x)`` for ``x`` in ``[0, eta_hat_c)``; values clamped to [0, 1] unless ``clip`` is off."""
        if n < 1:
            raise ValueError("n must be >= 1")
        self.extend(n)
        V = self.tables[n - 1]
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x < 0) or np.any(x >= self.eta_hat_c):
            raise ValueError("x must lie in [0, eta_hat_c)")
        M, w = self.M, self.omega
        top = min(n, M)
        piece = np.minimum((x // w).astype(int) + 1, top)
        out = np.empty_like(x)
        ex = np.exp(x / (1.0 + self.q))
        for i in np.unique(piece):
            sel = piece == i
            xs = x[sel]
            acc = np.full_like(xs, V[i, 1])
            last_form = i == n and n <= M
            for j in range(1, i + 1):
                base = ((j - 1) * w - xs) if last_form else (i * w - xs)
                acc += V[i, j + 1] * base ** (j - 1) / _fact(j - 1) * ex[sel]
            out[sel] = acc
        return np.clip(out, 0.0, 1.0) if clip else out


def build_v_tables(L: int, q: float, eta_hat_c: float) -> CusumCoeffV:
    if L < 1:
        raise ValueError("L must be >= 1")
    omega = cusum_drift(q)
    M = cusum_pieces(eta_hat_c, omega)
    V1 = np.zeros((M + 1, M + 2))
    V1[1, 1] = 1.0
    V1[1, 2] = -math.exp(-(eta_hat_c + omega) / (1.0 + q))
    return CusumCoeffV(q, eta_hat_c, omega, M, [V1]).extend(L)


@dataclass
class CusumCoeffA:
    q: float
    eta_hat_c: float
    omega: float
    M: int
    raw: list[np.ndarray] = field(default_factory=list)  # A-tilde
    norm: list[np.ndarray] = field(default_factory=list)  # A
    converged_at: int | None = None
    tol: float = 1e-8

    @property
    def depth(self) -> int:
        return len(self.raw)

    def delta(self, i: int) -> float:
        return math.exp(self.eta_hat_c - i * self.omega)

    def varsigma(self, a: int, b: int, l: int) -> float:
        return (a * self.eta_hat_c + b * self.omega) ** l / _fact(l)

    def upsilon(self, n: int) -> dict[int, float]:
        """Integral of ``G_n(y) e^{y}`` over each piece ``k`` (counted from the top)."""
        A = self.norm[n - 1]
        M = self.M
        top = min(n, M)
        out = {}
        for k in range(1, top + 1):
            if k < top:
                terms = [A[k, 1] * (self.delta(k - 1) - self.delta(k))]
                terms += [-A[k, l + 1] * (self.varsigma(1, 1, l) - self.varsigma(1, 0, l)) for l in range(1, k + 1)]
            elif n <= M:
                terms = [A[n, 1] * (self.delta(n - 1) - 1.0)]
                terms += [
                    -A[n, l + 1] * (self.varsigma(1, l - n, l) - self.varsigma(0, l - 1, l)) for l in range(1, n + 1)
                ]
            else:
                terms = [A[M, 1] * (self.delta(M - 1) - 1.0)]
                terms += [-A[M, l + 1] * (self.varsigma(1, 1, l) - self.varsigma(0, M, l)) for l in range(1, M + 1)]
            out[k] = math.fsum(terms)
        return out

    def normalizer(self, n: int) -> float:
        T = self.raw[n - 1]
        return T[1, 1] - T[1, 2] * math.exp(-self.eta_hat_c)

    def extend(self, depth: int) -> "CusumCoeffA":
        if depth > MAX_DEPTH:
            raise OverflowError(f"table depth {depth} exceeds {MAX_DEPTH}")
        M, ew = self.M, math.exp(-self.omega)
        while self.depth < depth and self.converged_at is None:
            n = self.depth
            A = self.norm[-1]
            new = np.zeros((M + 1, M + 2))
            top = min(n, M)
            ups = self.upsilon(n)
            new[1, 1] = 1.0
            for i in range(2, min(n + 1, M) + 1):
                new[i, 1] = A[i - 1, 1]
                new[i, 3 : i + 2] = ew * A[i - 1, 2 : i + 1]
            for i in range(1, top + 1):
                terms = [new[i, 1] * self.delta(i)]
                terms += [-ew * A[i - 1, l + 1] * self.varsigma(1, 0, l) for l in range(1, i)]
                terms += [-ew * ups[k] for k in range(i, top + 1)]
                new[i, 2] = math.fsum(terms)
            if n < M:
                s = math.fsum(A[n, l + 1] * self.varsigma(0, l - 1, l) for l in range(1, n + 1))
                new[n + 1, 2] = -ew * s + ew * new[n + 1, 1]
            self.raw.append(new)
            d = self.normalizer(n + 1)
            if not d > 0:
                raise FloatingPointError(f"non-positive normalizer {d} at n={n + 1}")
            self.norm.append(new / d)
            if n + 1 > M and self._sup_change(n + 1) < self.tol:
                self.converged_at = n + 1
        return self

    def probe(self) -> np.ndarray:
        return np.linspace(0.0, self.eta_hat_c, 257)

    def _sup_change(self, n: int) -> float:
        """Sup-norm distance between ``G_n`` and ``G_{n-1}`` on a probe grid."""
        x = self.probe()
        return float(np.max(np.abs(self._eval(self.norm[n - 1], n, x) - self._eval(self.norm[n - 2], n - 1, x))))

    def _index(self, nu: int) -> int:
        if nu < 1:
            raise ValueError("nu must be >= 1")
        self.extend(nu)
        return min(nu, self.depth)

    def _pieces(self, n: int, x: np.ndarray):
        top = min(n, self.M)
        piece = np.clip(np.ceil((self.eta_hat_c - x) / self.omega).astype(int), 1, top)
        return piece, top

    def _shift(self, n: int, i: int, j: int) -> float:
        last_form = i == n and n <= self.M
        return (j - 1) * self.omega if last_form else i * self.omega

    def g_tilde(self, nu: int, x) -> np.ndarray:
        n = self._index(nu)
        return self._eval(self.raw[n - 1], n, x)

    def g(self, nu: int, x) -> np.ndarray:
        """Conditional CDF ``P(C_hat_nu <= x | no alarm by nu)`` on ``[0, eta_hat_c)``."""
        n = self._index(nu)
        return self._eval(self.norm[n - 1], n, x)

    def atom(self, nu: int) -> float:
        return float(self.g(nu, 0.0)[0])

    def _eval(self, T: np.ndarray, n: int, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x < 0) or np.any(x > self.eta_hat_c):
            raise ValueError("x must lie in [0, eta_hat_c]")
        piece, _ = self._pieces(n, x)
        out = np.empty_like(x)
        emx = np.exp(-x)
        for i in np.unique(piece):
            sel = piece == i
            xs = x[sel]
            acc = np.full_like(xs, T[i, 1])
            for j in range(1, i + 1):
                acc -= T[i, j + 1] * (xs + self._shift(n, i, j)) ** (j - 1) / _fact(j - 1) * emx[sel]
            out[sel] = acc
        return out

    def density(self, nu: int, x) -> np.ndarray:
        """Derivative of :meth:`g` for ``x > 0`` (the continuous part)."""
        n = self._index(nu)
        T = self.norm[n - 1]
        x = np.atleast_1d(np.asarray(x, dtype=float))
        piece, _ = self._pieces(n, x)
        out = np.zeros_like(x)
        emx = np.exp(-x)
        for i in np.unique(piece):
            sel = piece == i
            xs = x[sel]
            acc = np.zeros_like(xs)
            for j in range(1, i + 1):
                base = xs + self._shift(n, i, j)
                p = base ** (j - 1) / _fact(j - 1)
                dp = base ** (j - 2) / _fact(j - 2) if j >= 2 else 0.0
                acc -= T[i, j + 1] * (dp - p)
            out[sel] = acc * emx[sel]
        return out


def build_a_tables(nu_cap: int, q: float, eta_hat_c: float, tol: float = 1e-8) -> CusumCoeffA:
    if nu_cap < 1:
        raise ValueError("nu_cap must be >= 1")
    omega = cusum_drift(q)
    M = cusum_pieces(eta_hat_c, omega)
    A1 = np.zeros((M + 1, M + 2))
    A1[1, 1] = 1.0
    A1[1, 2] = math.exp(-omega)
    tab = CusumCoeffA(q, eta_hat_c, omega, M, [A1], [], tol=tol)
    tab.norm.append(A1 / tab.normalizer(1))
    return tab.extend(nu_cap)
