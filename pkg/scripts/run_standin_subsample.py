"""Subsampling coverage study on the built-in stand-in population.

    python scripts/run_standin_subsample.py --out runs/standin --reps 1000 --b 300
"""

import argparse

from calboot.harness import SubsampleStudySpec, subsample_study
from calboot.intervals import STANDARD_METHODS, BootConfig, parse_methods
from calboot.standin import standin_population


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--m", type=int, default=500)
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--b", type=int, default=300, help="B1 = B2")
    ap.add_argument("--methods", default="standard")
    ap.add_argument("--seed", type=int, default=8)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    methods = STANDARD_METHODS if args.methods == "standard" else parse_methods(args.methods)
    spec = SubsampleStudySpec(standin_population(), args.m, args.reps, methods, 0.90,
                              label="standin")
    report = subsample_study(spec, BootConfig(args.b, args.b, args.seed), threads=args.threads)
    report.write(args.out)
    print(f"{'coef':<16}" + "".join(f"{m:>12}" for m in report.methods()))
    for coef in dict.fromkeys(c.coef for c in report.cells):
        row = (report.cell("standin", m, coef).coverage for m in report.methods())
        print(f"{coef:<16}" + "".join(f"{v:>12.3f}" for v in row))


if __name__ == "__main__":
    main()
