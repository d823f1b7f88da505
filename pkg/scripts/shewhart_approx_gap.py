"""Closed-form Shewhart optimum against the exhaustive search over gamma and theta."""

import numpy as np

from covertseq.optimizer import approx_shewhart, exhaustive_shewhart

if __name__ == "__main__":
    print(f"{'gamma':>7} {'theta':>6} {'L_ex':>5} {'L_ap':>5} {'I_ex':>9} {'I_ap':>9} {'gap':>7}")
    for gamma in (60, 100, 200, 500, 1000, 5000, 10000):
        for theta in (0.9, 0.95, 0.99):
            ex, ap = exhaustive_shewhart(gamma, theta), approx_shewhart(gamma, theta)
            if not ex.feasible:
                print(f"{gamma:>7} {theta:>6} infeasible")
                continue
            gap = 1 - ap.i_star / ex.i_star
            print(f"{gamma:>7} {theta:>6} {ex.l_star:>5} {ap.l_star:>5} {ex.i_star:9.4f} {ap.i_star:9.4f} {gap:7.2%}")
