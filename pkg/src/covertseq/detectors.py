"""Shewhart, CUSUM and Shiryaev-Roberts statistics on observation powers.

All three tests stop at the first ``t >= 1`` with ``statistic >= threshold``;
ties alarm.  The CUSUM statistic is kept in the scaled form
``C_hat = (1+q)/q * C`` so that its increment is simply ``x - omega``.

The step functions accept scalars or numpy arrays, which lets the Monte Carlo
module advance many independent runs at once with the same code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .signal_model import cusum_drift, exponential, likelihood_ratio

SHEWHART = "shewhart"
CUSUM = "cusum"
SR = "sr"
TESTS = (SHEWHART, CUSUM, SR)

DEFAULT_MAX_STEPS = 10**8


class ThresholdError(ValueError):
    """Threshold outside the range the analysis supports."""


class SrThresholdError(ThresholdError):
    """SR threshold below ``1/q``; the statistic would alarm deterministically."""


@dataclass(frozen=True)
class ShewhartConfig:
    eta_s_prime: float

    def __post_init__(self) -> None:
        if not self.eta_s_prime > 0:
            raise ThresholdError(f"eta_s_prime must be > 0, got {self.eta_s_prime}")

    def eta_s(self, q: float) -> float:
        """Equivalent threshold on the likelihood ratio."""
        return likelihood_ratio(self.eta_s_prime, q)


@dataclass(frozen=True)
class CusumState:
    c_hat: float
    omega: float
    eta_hat_c: float

    def __post_init__(self) -> None:
        if self.c_hat < 0:
            raise ValueError("c_hat must be >= 0")
        if not self.eta_hat_c > 0:
            raise ThresholdError(f"eta_hat_c must be > 0, got {self.eta_hat_c}")

    @classmethod
    def start(cls, q: float, eta_hat_c: float) -> "CusumState":
        return cls(0.0, cusum_drift(q), eta_hat_c)

    @property
    def m_pieces(self) -> int:
        return max(1, math.ceil(self.eta_hat_c / self.omega))

    @property
    def alarm(self) -> bool:
        return self.c_hat >= self.eta_hat_c


@dataclass(frozen=True)
class SrState:
    r: float
    eta_r: float
    q: float

    def __post_init__(self) -> None:
        if self.r < 0:
            raise ValueError("r must be >= 0")
        check_sr_threshold(self.eta_r, self.q)

    @classmethod
    def start(cls, q: float, eta_r: float) -> "SrState":
        return cls(0.0, eta_r, q)

    @property
    def alarm(self) -> bool:
        return self.r >= self.eta_r


def check_sr_threshold(eta_r: float, q: float) -> None:
    # relative slack so that eta_r computed as 1/q in floating point passes
    if eta_r < (1.0 / q) * (1 - 1e-12):
        raise SrThresholdError(f"SR threshold {eta_r} is below 1/q = {1 / q} (q = {q})")


@dataclass(frozen=True)
class StoppingRecord:
    t_stop: int
    nu: float
    censored: bool = False

    @property
    def alarmed_pre_change(self) -> bool:
        return self.t_stop <= self.nu

    @property
    def delay(self) -> float | None:
        return self.t_stop - self.nu if self.t_stop > self.nu else None


# --- single-step transitions (scalar or vectorized) -------------------------

def shewhart_step(x, cfg: ShewhartConfig):
    return np.asarray(x) >= cfg.eta_s_prime if np.ndim(x) else x >= cfg.eta_s_prime


def cusum_update(c_hat, x, omega: float):
    return np.maximum(0.0, c_hat + x - omega)


def cusum_step(s: CusumState, x: float) -> CusumState:
    return replace(s, c_hat=max(0.0, s.c_hat + x - s.omega))


def sr_update(r, x, q: float):
    return (1.0 + r) / (1.0 + q) * np.exp(q * np.asarray(x) / (1.0 + q))


def sr_step(s: SrState, x: float, q: float | None = None) -> SrState:
    q = s.q if q is None else q
    return replace(s, r=(1.0 + s.r) / (1.0 + q) * math.exp(q * x / (1.0 + q)))


def sr_floor(q: float, t: int) -> float:
    """Smallest value the SR statistic can take after ``t`` steps from zero."""
    return -math.expm1(-t * math.log1p(q)) / q


# --- generic detector used by simulations ------------------------------------

@dataclass(frozen=True)
class Detector:
    """A test kind with its threshold, advanced on arrays of runs.

    ``threshold`` is ``eta_s_prime`` for Shewhart, ``eta_hat_c`` for CUSUM and
    ``eta_r`` for SR.
    """

    kind: str
    threshold: float
    q: float

    def __post_init__(self) -> None:
        if self.kind not in TESTS:
            raise ValueError(f"unknown test {self.kind!r}")
        if not self.threshold > 0:
            raise ThresholdError(f"threshold must be > 0, got {self.threshold}")
        if self.kind == SR:
            check_sr_threshold(self.threshold, self.q)

    @property
    def omega(self) -> float:
        return cusum_drift(self.q)

    def initial(self, size: int) -> np.ndarray:
        return np.zeros(size)

    def update(self, stat, x):
        if self.kind == SHEWHART:
            return np.asarray(x, dtype=float)
        if self.kind == CUSUM:
            return cusum_update(stat, x, self.omega)
        return sr_update(stat, x, self.q)

    def alarmed(self, stat):
        return stat >= self.threshold


def run_to_alarm(
    detector: Detector,
    nu: float,
    L: float,
    rng: np.random.Generator,
    max_steps: int = DEFAULT_MAX_STEPS,
    chunk: int = 4096,
) -> StoppingRecord:
    """Simulate one run of the change model and return the first alarm time.

    Observations are pre-change for ``t <= nu``, post-change for
    ``nu < t <= nu + L`` and pre-change again afterwards.  ``nu`` and ``L``
    may be ``math.inf``.  Runs that reach ``max_steps`` without an alarm are
    returned with ``censored=True`` and ``t_stop = max_steps``.
    """
    q = detector.q
    stat = 0.0
    t0 = 0
    while t0 < max_steps:
        n = min(chunk, max_steps - t0)
        t = np.arange(t0 + 1, t0 + n + 1)
        mean = np.where((t > nu) & (t <= nu + L), 1.0 + q, 1.0)
        xs = exponential(rng, 1.0, n) * mean
        for k in range(n):
            stat = float(detector.update(stat, xs[k]))
            if stat >= detector.threshold:
                return StoppingRecord(int(t[k]), nu)
        t0 += n
    return StoppingRecord(max_steps, nu, censored=True)
