"""Channel model seen by the warden, in units of its own noise power.

Every observation enters the detectors only through its power
``x = |y_t|^2``.  Before the change (and after the transmission ends) ``x`` is
Exponential with mean 1; during the ``L`` transmitted samples it is Exponential
with mean ``1 + q``.

Random streams
--------------
All sampling goes through :class:`numpy.random.Generator` backed by PCG64.
Exponential draws use the inverse CDF ``x = -mean * log1p(-U)`` on the
generator's 53-bit uniforms (``Generator.random``), so a fixed seed gives the
same values on every platform.  Independent streams for parallel work are
derived with :func:`stream`, which keys a ``SeedSequence`` by
``(master_seed, *path)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PRE = "pre"
POST = "post"


@dataclass(frozen=True)
class ScenarioParams:
    """Normalized scenario: noise power at the warden is exactly 1.

    ``nu`` may be ``math.inf`` (no transmission at all) and ``L`` may be
    ``math.inf`` (persistent change) for simulation purposes.
    """

    q: float
    sigma_ratio: float = 1.0
    gamma: float = 500.0
    theta: float = 0.95
    nu: float = 0
    L: float = 1

    def __post_init__(self) -> None:
        if not self.q > 0:
            raise ValueError(f"q must be > 0, got {self.q}")
        if not self.sigma_ratio > 0:
            raise ValueError(f"sigma_ratio must be > 0, got {self.sigma_ratio}")
        if not self.gamma > 1:
            raise ValueError(f"gamma must be > 1, got {self.gamma}")
        if not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if not self.nu >= 0:
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        if not self.L >= 1:
            raise ValueError(f"L must be >= 1, got {self.L}")

    @property
    def omega(self) -> float:
        return cusum_drift(self.q)

    @classmethod
    def from_raw(cls, q_raw: float, sigma_w2: float, sigma_b2: float, **kw) -> "ScenarioParams":
        q, ratio = normalize(q_raw, sigma_w2, sigma_b2)
        return cls(q=q, sigma_ratio=ratio, **kw)


def normalize(q_raw: float, sigma_w2: float, sigma_b2: float) -> tuple[float, float]:
    """Express a raw transmit power in units of the warden's noise power.

    Returns ``(q, sigma_ratio)`` with ``q = q_raw / sigma_w2`` and
    ``sigma_ratio = sigma_w2 / sigma_b2``.
    """
    if not sigma_w2 > 0 or not sigma_b2 > 0:
        raise ValueError("noise powers must be positive")
    if q_raw < 0:
        raise ValueError(f"q_raw must be >= 0, got {q_raw}")
    return q_raw / sigma_w2, sigma_w2 / sigma_b2


def likelihood_ratio(x, q: float):
    """Post/pre density ratio of an observation with power ``x``."""
    if q <= 0:
        raise ValueError(f"q must be > 0, got {q}")
    if np.ndim(x) == 0:
        return math.exp(q * x / (1.0 + q)) / (1.0 + q)
    return np.exp(q * np.asarray(x, dtype=float) / (1.0 + q)) / (1.0 + q)


def log_likelihood_ratio(x, q: float):
    return q * np.asarray(x, dtype=float) / (1.0 + q) - math.log1p(q)


def cusum_drift(q: float) -> float:
    """Power level ``omega`` at which the likelihood ratio equals one."""
    return (1.0 + q) / q * math.log1p(q)


def stream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for the task identified by ``(seed, *path)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, path)])))


def exponential(rng: np.random.Generator, mean: float, size=None):
    """Inverse-CDF exponential draws with the given mean."""
    u = rng.random(size)
    return -mean * np.log1p(-u)


def sample_observation(rng: np.random.Generator, phase: str, q: float, size=None):
    """Draw observation powers for the given phase (``"pre"`` or ``"post"``)."""
    if phase == PRE:
        return exponential(rng, 1.0, size)
    if phase == POST:
        return exponential(rng, 1.0 + q, size)
    raise ValueError(f"unknown phase {phase!r}")
