"""Monte Carlo oracle for covert probabilities, run lengths and statistic laws.

Trials are simulated in fixed-size blocks, vectorized over the runs of a
block.  Block ``b`` draws from ``stream(seed, b)`` and block results are
reduced in block order, so estimates depend only on ``(seed, trials)`` and
not on how many threads ran the blocks.

Conditioning on no alarm before the change is done by rejection: runs that
alarm at or before ``nu`` are dropped.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .detectors import DEFAULT_MAX_STEPS, Detector
from .signal_model import exponential, stream

BLOCK = 1 << 14
MIN_TRIALS = 1000
MIN_KEPT_FRACTION = 0.01
MAX_CENSORED_FRACTION = 1e-3


class ConditioningStarvation(RuntimeError):
    """Too few runs survive the pre-change period to condition on."""


class CensoringError(RuntimeError):
    """Too many runs hit the step cap without an alarm."""


def thread_count() -> int:
    """Worker threads: ``COVERTSEQ_THREADS`` if set, else the available cores."""
    cores = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
    env = os.environ.get("COVERTSEQ_THREADS")
    if env:
        try:
            return max(1, min(int(env), cores))
        except ValueError:
            raise ValueError(f"COVERTSEQ_THREADS must be an integer, got {env!r}") from None
    return cores


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_trials: int
    n_conditioned_kept: int
    seed: int
    n_censored: int = 0

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.mean - value) <= sigmas * self.std_error


def _blocks(trials: int) -> list[tuple[int, int]]:
    return [(b, min(BLOCK, trials - b * BLOCK)) for b in range(math.ceil(trials / BLOCK))]


def _map_blocks(fn, trials: int, threads: int | None):
    blocks = _blocks(trials)
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(blocks) == 1:
        return [fn(b, n) for b, n in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda bn: fn(*bn), blocks))


def _advance(det: Detector, stat: np.ndarray, steps: int, mean: float, rng) -> np.ndarray:
    """Run ``steps`` steps and return the statistics of the runs still silent."""
    for _ in range(steps):
        if stat.size == 0:
            break
        stat = det.update(stat, exponential(rng, mean, stat.size))
        stat = stat[stat < det.threshold]
    return stat


def _check_trials(trials: int) -> None:
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials, got {trials}")


def _starvation(kept: int, trials: int, nu: int) -> None:
    if kept < MIN_KEPT_FRACTION * trials:
        raise ConditioningStarvation(f"only {kept} of {trials} runs survive to nu={nu}")


def estimate_covert_prob(
    det: Detector, nu: int, L: int, trials: int, seed: int, threads: int | None = None
) -> McEstimate:
    """Fraction of runs silent during ``(nu, nu+L]`` among runs silent up to ``nu``."""
    _check_trials(trials)
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    if nu < 0:
        raise ValueError(f"nu must be >= 0, got {nu}")

    def block(b: int, n: int) -> tuple[int, int]:
        rng = stream(seed, b)
        stat = _advance(det, det.initial(n), int(nu), 1.0, rng)
        kept = stat.size
        stat = _advance(det, stat, int(L), 1.0 + det.q, rng)
        return kept, stat.size

    parts = _map_blocks(block, trials, threads)
    kept = sum(k for k, _ in parts)
    quiet = sum(s for _, s in parts)
    _starvation(kept, trials, nu)
    p = quiet / kept
    return McEstimate(p, math.sqrt(p * (1 - p) / kept), trials, kept, seed)


def estimate_arl2fa(
    det: Detector,
    trials: int,
    seed: int,
    max_steps: int = DEFAULT_MAX_STEPS,
    threads: int | None = None,
) -> McEstimate:
    """Mean alarm time under pure noise.  Censored runs count at the cap."""
    _check_trials(trials)

    def block(b: int, n: int) -> tuple[float, float, int]:
        rng = stream(seed, b)
        stat = det.initial(n)
        t = 0
        total = total_sq = 0.0
        while stat.size and t < max_steps:
            t += 1
            stat = det.update(stat, exponential(rng, 1.0, stat.size))
            alarmed = stat >= det.threshold
            k = int(np.count_nonzero(alarmed))
            if k:
                total += k * t
                total_sq += k * float(t) * t
                stat = stat[~alarmed]
        censored = stat.size
        total += censored * float(max_steps)
        total_sq += censored * float(max_steps) ** 2
        return total, total_sq, censored

    parts = _map_blocks(block, trials, threads)
    total = math.fsum(p[0] for p in parts)
    total_sq = math.fsum(p[1] for p in parts)
    censored = sum(p[2] for p in parts)
    if censored > MAX_CENSORED_FRACTION * trials:
        raise CensoringError(f"{censored} of {trials} runs reached the cap of {max_steps} steps")
    mean = total / trials
    var = max(total_sq / trials - mean * mean, 0.0) * trials / (trials - 1)
    return McEstimate(mean, math.sqrt(var / trials), trials, trials, seed, censored)


@dataclass(frozen=True)
class EmpiricalCdf:
    """Sorted statistic values at ``nu`` among runs silent up to ``nu``."""

    values: np.ndarray
    n_trials: int
    seed: int

    @property
    def n_kept(self) -> int:
        return self.values.size

    def __call__(self, x) -> np.ndarray:
        return np.searchsorted(self.values, np.asarray(x, dtype=float), side="right") / self.n_kept

    def atom_at_zero(self) -> float:
        return float(self(0.0))


def empirical_statistic_cdf(
    det: Detector, nu: int, trials: int, seed: int, threads: int | None = None
) -> EmpiricalCdf:
    _check_trials(trials)
    if nu < 1:
        raise ValueError("nu must be >= 1")

    def block(b: int, n: int) -> np.ndarray:
        return _advance(det, det.initial(n), int(nu), 1.0, stream(seed, b))

    values = np.sort(np.concatenate(_map_blocks(block, trials, threads)))
    _starvation(values.size, trials, nu)
    return EmpiricalCdf(values, trials, seed)


def ks_distance(emp: EmpiricalCdf, cdf, cdf_left=None) -> float:
    """Sup distance between an empirical CDF and a model CDF.

    The model CDF may jump (an atom); ``cdf_left`` gives its left limits and
    defaults to ``cdf`` itself.
    """
    x, idx = np.unique(emp.values, return_index=True)
    n = emp.n_kept
    upper = np.append(idx[1:], n) / n  # empirical CDF at x
    lower = idx / n  # empirical left limit at x
    model = np.asarray(cdf(x), dtype=float)
    model_left = model if cdf_left is None else np.asarray(cdf_left(x), dtype=float)
    return float(max(np.max(np.abs(upper - model)), np.max(np.abs(lower - model_left))))
