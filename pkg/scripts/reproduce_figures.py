"""Write the CSV data behind every figure, one file per test.

    python scripts/reproduce_figures.py --out-dir figures          # q step 1e-3
    python scripts/reproduce_figures.py --out-dir figures --quick  # q step 0.02, N=500
"""

import argparse
import sys

from covertseq.cli import FIGURES, main


def run(out_dir: str, quick: bool, seed: int) -> int:
    grid = ["--q-min", "0.02", "--q-max", "1", "--dq", "0.02", "--N", "500"] if quick else []
    for fig in FIGURES:
        args = ["figure", fig, "--test", "shewhart,cusum,sr", "--out-dir", out_dir, "--seed", str(seed), *grid]
        if fig in ("covert-vs-L", "covert-vs-q"):
            args += ["--nu", "50"]
        code = main(args)
        if code:
            return code
    return 0


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out-dir", default="figures")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()
    sys.exit(run(a.out_dir, a.quick, a.seed))
