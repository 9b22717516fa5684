"""Export the stand-in population as CSV, for use with ``calboot subsample <file>``.

    python scripts/make_standin_csv.py standin.csv
"""

import argparse
import csv

from calboot.standin import COVARIATES, RESPONSE, standin_table


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("path")
    ap.add_argument("--n", type=int, default=50_000)
    args = ap.parse_args()
    x, y = standin_table(n=args.n)
    with open(args.path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow((RESPONSE, *COVARIATES))
        for yi, row in zip(y, x):
            w.writerow((repr(float(yi)), *(repr(float(v)) for v in row)))


if __name__ == "__main__":
    main()
