"""Coverage study over a scenario grid; writes a report directory and prints the summary.

    python scripts/run_grid_study.py --out runs/grid --reps 500 --b 2000 --threads 8
    python scripts/run_grid_study.py --out runs/small --n 32 --reps 300 --b 300
"""

import argparse
import json

from calboot.harness import run_grid
from calboot.intervals import STANDARD_METHODS, BootConfig
from calboot.synthetic import GridConfig, scenario_grid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--grid-config")
    ap.add_argument("--n", type=int, nargs="*", help="restrict sample sizes")
    ap.add_argument("--reps", type=int, default=500)
    ap.add_argument("--b", type=int, default=2000, help="B1 = B2")
    ap.add_argument("--level", type=float, default=0.90)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    cfg = GridConfig.load(args.grid_config) if args.grid_config else GridConfig()
    grid = scenario_grid(cfg)
    if args.n:
        grid = [s for s in grid if s.n in args.n]
    report = run_grid(grid, STANDARD_METHODS, args.level, args.reps,
                      BootConfig(args.b, args.b, args.seed), threads=args.threads)
    report.write(args.out)
    print(json.dumps(report.summary(), indent=2))


if __name__ == "__main__":
    main()
