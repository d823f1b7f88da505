"""Piecewise Chebyshev interpolation on fixed breakpoints.

Functions that are smooth between known kinks are stored by their values at
Chebyshev extreme points on each piece and evaluated with the barycentric
formula.  Integrals against ``e^{rate y}`` use Gauss-Legendre per piece.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class PiecewiseCheb:
    """Function on ``[edges[0], edges[-1]]`` given by values at Chebyshev points per piece."""

    edges: np.ndarray
    order: int
    values: np.ndarray  # shape (pieces, order)

    @staticmethod
    def reference(order: int) -> tuple[np.ndarray, np.ndarray]:
        k = np.arange(order)
        t = np.cos(np.pi * k / (order - 1))[::-1]  # Chebyshev extreme points, ascending
        w = np.ones(order)
        w[1::2] = -1
        w[0] *= 0.5
        w[-1] *= 0.5
        if order % 2 == 0:
            w = -w  # sign pattern aligned with ascending order
        return t, w

    @classmethod
    def nodes(cls, edges: np.ndarray, order: int) -> np.ndarray:
        t, _ = cls.reference(order)
        a, b = edges[:-1, None], edges[1:, None]
        return 0.5 * (b - a) * t + 0.5 * (a + b)

    @classmethod
    def from_function(cls, f, edges: np.ndarray, order: int) -> "PiecewiseCheb":
        nodes = cls.nodes(edges, order)
        return cls(edges, order, np.asarray(f(nodes), dtype=float).reshape(nodes.shape))

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        piece = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.edges) - 2)
        t_ref, w = self.reference(self.order)
        a, b = self.edges[piece], self.edges[piece + 1]
        t = (2 * x - (a + b)) / (b - a)
        diff = t[:, None] - t_ref[None, :]
        exact = np.isclose(diff, 0.0, atol=1e-15)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = w[None, :] / diff
            vals = self.values[piece]
            out = np.sum(c * vals, axis=1) / np.sum(c, axis=1)
        hit = exact.any(axis=1)
        if hit.any():
            idx = exact[hit].argmax(axis=1)
            out[hit] = self.values[piece[hit], idx]
        return out

    def integral(self, lo: float, hi: float, rate: float, gauss: int | None = None) -> float:
        """``int_lo^hi f(y) e^{rate y} dy`` splitting at the piece edges."""
        if hi <= lo:
            return 0.0
        gauss = gauss or self.order + 8
        t, w = np.polynomial.legendre.leggauss(gauss)
        cuts = self.edges[(self.edges > lo) & (self.edges < hi)]
        pts = np.concatenate([[lo], cuts, [hi]])
        a, b = pts[:-1, None], pts[1:, None]
        y = (0.5 * (b - a) * t + 0.5 * (a + b)).ravel()
        ww = (0.5 * (b - a) * w).ravel()
        return math.fsum(ww * self(y) * np.exp(rate * y))

    def antiderivative(self, t, rate: float, gauss: int | None = None) -> np.ndarray:
        """``F(t) = int_edges[0]^t f(y) e^{rate y} dy`` for an array of ``t``."""
        gauss = gauss or self.order + 8
        g, w = np.polynomial.legendre.leggauss(gauss)
        e = self.edges
        a, b = e[:-1, None], e[1:, None]
        y = 0.5 * (b - a) * g + 0.5 * (a + b)
        per_piece = np.sum(0.5 * (b - a) * w * self(y.ravel()).reshape(y.shape) * np.exp(rate * y), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(per_piece)])
        t = np.clip(np.atleast_1d(np.asarray(t, dtype=float)), e[0], e[-1])
        piece = np.clip(np.searchsorted(e, t, side="right") - 1, 0, len(e) - 2)
        lo = e[piece][:, None]
        yt = 0.5 * (t[:, None] - lo) * g + 0.5 * (t[:, None] + lo)
        part = np.sum(0.5 * (t[:, None] - lo) * w * self(yt.ravel()).reshape(yt.shape) * np.exp(rate * yt), axis=1)
        return cum[piece] + part


def basis_matrix(order: int, t) -> np.ndarray:
    """Values of the ``order`` Lagrange cardinal functions at reference points ``t`` in [-1, 1]."""
    t_ref, w = PiecewiseCheb.reference(order)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    diff = t[:, None] - t_ref[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = w[None, :] / diff
        out = c / np.sum(c, axis=1, keepdims=True)
    hit = exact.any(axis=1)
    out[hit] = exact[hit].astype(float)
    return out


def integral_matrix(edges: np.ndarray, order: int, upper, rate: float, gauss: int | None = None) -> np.ndarray:
    """Row ``r`` maps nodal values of ``f`` to ``int_{edges[0]}^{upper_r} f(y) e^{rate y} dy``."""
    gauss = gauss or order + 8
    g, gw = np.polynomial.legendre.leggauss(gauss)
    a, b = edges[:-1], edges[1:]
    pieces = len(a)
    basis = basis_matrix(order, g)
    y = 0.5 * (b - a)[:, None] * g + 0.5 * (a + b)[:, None]
    full = np.einsum("pg,gj->pj", 0.5 * (b - a)[:, None] * gw * np.exp(rate * y), basis).ravel()
    upper = np.clip(np.atleast_1d(np.asarray(upper, dtype=float)), edges[0], edges[-1])
    col_piece = np.repeat(np.arange(pieces), order)
    piece = np.clip(np.searchsorted(edges, upper, side="right") - 1, 0, pieces - 1)
    w = np.where(col_piece[None, :] < piece[:, None], full[None, :], 0.0)
    lo, hi = a[piece], upper
    ys = 0.5 * (hi - lo)[:, None] * g + 0.5 * (hi + lo)[:, None]
    tref = (2 * ys - (a[piece] + b[piece])[:, None]) / (b[piece] - a[piece])[:, None]
    part = basis_matrix(order, tref.ravel()).reshape(len(upper), gauss, order)
    part = np.einsum("rg,rgj->rj", 0.5 * (hi - lo)[:, None] * gw * np.exp(rate * ys), part)
    rows = np.arange(len(upper))[:, None]
    w[rows, piece[:, None] * order + np.arange(order)] += part
    return w
