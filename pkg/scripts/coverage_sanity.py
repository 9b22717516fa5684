"""Every method on a correctly specified cell (linear mean, normal X, homoskedastic noise).

    python scripts/coverage_sanity.py --n 128 --reps 400 --b 300
"""

import argparse

from calboot.harness import run_grid
from calboot.intervals import BootConfig, Method
from calboot.synthetic import MeanFn, Noise, Scenario, XDist


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--reps", type=int, default=400)
    ap.add_argument("--b", type=int, default=300)
    ap.add_argument("--seed", type=int, default=4)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    s = Scenario(args.n, MeanFn.LINEAR, XDist.STD_NORMAL, Noise.HOMOSK_NORMAL)
    report = run_grid([s], tuple(Method), 0.90, args.reps, BootConfig(args.b, args.b, args.seed),
                      threads=args.threads)
    for c in report.cells:
        print(f"{c.method:<12} coverage {c.coverage:.4f} +- {c.mc_se:.4f}  length {c.avg_length:.4f}")


if __name__ == "__main__":
    main()
