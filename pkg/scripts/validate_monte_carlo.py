"""Analytic covert probabilities next to simulation for all three tests."""

import argparse

from covertseq.calibration import threshold_for
from covertseq.covert import covert_prob
from covertseq.detectors import TESTS, Detector
from covertseq.montecarlo import estimate_covert_prob


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--gamma", type=float, default=500.0)
    p.add_argument("--q", type=float, default=0.15)
    p.add_argument("--trials", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=1)
    a = p.parse_args()
    print(f"{'test':>9} {'nu':>4} {'L':>3} {'analytic':>10} {'simulated':>10} {'se':>8} {'z':>6}")
    for test in TESTS:
        det = Detector(test, threshold_for(test, a.gamma, a.q), a.q)
        for nu in (0, 50, 500):
            for L in (5, 15, 40):
                exact = covert_prob(test, a.q, L, nu, a.gamma).value
                est = estimate_covert_prob(det, nu, L, a.trials, a.seed)
                z = (est.mean - exact) / est.std_error if est.std_error else 0.0
                print(f"{test:>9} {nu:>4} {L:>3} {exact:10.6f} {est.mean:10.6f} {est.std_error:8.1e} {z:6.2f}")


if __name__ == "__main__":
    main()
