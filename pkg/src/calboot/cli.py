"""Command-line front end: ``calboot {ci,simulate,subsample,report}``.

Exit status: 0 success, 2 usage error, 3 unreadable input, 4 computation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

import numpy as np

from .errors import CalbootError, ParseError
from .harness import CoverageReport, SubsampleStudySpec, aggregate, fmt, run_grid
from .harness import subsample_study
from .intervals import STANDARD_METHODS, BootConfig, BootstrapRun, Method, parse_methods
from .regress import Dataset
from .synthetic import GridConfig, scenario_grid

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_COMPUTE = 4

CI_COLUMNS = ("coef", "method", "level", "lower", "upper", "estimate", "lambda_hat", "flags")


def read_table(path: str | Path, response: str, delimiter: str = ",") -> Dataset:
    """Numeric table with a header row; every column but ``response`` is a covariate.

    Rows are numbered from 1 for the first data line.  Any cell that is not a
    finite number raises :class:`ParseError`.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty input") from None
    if len(set(header)) != len(header):
        raise ParseError("duplicate column names in header")
    if response not in header:
        raise ParseError(f"response column {response!r} not in header")
    rows = []
    for i, raw in enumerate(reader, start=1):
        if not raw or all(not c.strip() for c in raw):
            continue
        if len(raw) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(raw)}", row=i)
        vals = []
        for name, cell in zip(header, raw):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"not a number: {cell!r}", row=i, column=name) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {cell!r}", row=i, column=name)
            vals.append(v)
        rows.append(vals)
    if not rows:
        raise ParseError("no data rows")
    table = np.array(rows)
    yi = header.index(response)
    names = tuple(h for h in header if h != response)
    if not names:
        raise ParseError("no covariate columns besides the response")
    return Dataset.from_covariates(np.delete(table, yi, axis=1), table[:, yi], names)


def _level(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return 1.0 - alpha


def _config(args) -> BootConfig:
    return BootConfig(b1=args.b1, b2=args.b2, master_seed=args.seed)


def cmd_ci(args) -> int:
    data = read_table(args.input, args.response, args.delimiter)
    level = _level(args.alpha)
    run = BootstrapRun(data, _config(args))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CI_COLUMNS)
    for j, name in enumerate(data.coef_names()):
        for m in args.methods:
            est = run.interval(m, j, level)
            lam = "" if est.lambda_hat is None else fmt(est.lambda_hat)
            w.writerow([name, m.value, fmt(level), fmt(est.lower), fmt(est.upper),
                        fmt(est.estimate), lam, ";".join(est.flags)])
    sys.stdout.write(buf.getvalue())
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    return 0


def cmd_simulate(args) -> int:
    config = GridConfig.load(args.grid_config) if args.grid_config else GridConfig()
    grid = scenario_grid(config)
    report = run_grid(grid, args.methods, _level(args.alpha), args.reps, _config(args),
                      threads=args.threads)
    report.meta["grid"] = config.to_dict()
    report.write(args.out, log=not args.no_log)
    _print_summary(report)
    return 0


def cmd_subsample(args) -> int:
    if args.input:
        if not args.response:
            raise _Usage("--response is required with an input table")
        pop = read_table(args.input, args.response, args.delimiter)
        label = Path(args.input).stem
    else:
        from .standin import standin_population

        pop = standin_population()
        label = "standin"
    spec = SubsampleStudySpec(pop, args.m, args.reps, args.methods, _level(args.alpha),
                              label=label)
    report = subsample_study(spec, _config(args), threads=args.threads)
    report.write(args.out, log=not args.no_log)
    _print_summary(report)
    return 0


def cmd_report(args) -> int:
    try:
        report = CoverageReport.read(args.input)
    except (OSError, ValueError, KeyError) as exc:
        raise ParseError(f"cannot read report in {args.input}: {exc}") from None
    if report.records:
        check = aggregate(report.records, report.level)
        got = {(c.scenario_id, c.coef, c.method): c for c in report.cells}
        for c in check:
            c0 = got.get((c.scenario_id, c.coef, c.method))
            if c0 is None or (c0.cover_count, c0.replications, c0.failures) != (
                    c.cover_count, c.replications, c.failures):
                raise CalbootError(f"cells.csv disagrees with the replication log at "
                                   f"{c.scenario_id}/{c.coef}/{c.method}")
    text = _summary_text(report)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return 0


def _summary_text(report: CoverageReport) -> str:
    lines = [f"target level {fmt(report.level)}", "", "method MAD mean_length"]
    lengths = report.mean_length()
    for m, v in report.mad().items():
        lines.append(f"{m} {v:.4f} {lengths[m]:.4f}")
    lines += ["", "number scenario coef " + " ".join(report.methods())]
    numbering = report.numbering()
    for (sid, coef), num in sorted(numbering.items(), key=lambda kv: kv[1]):
        covs = [f"{report.cell(sid, m, coef).coverage:.3f}" for m in report.methods()]
        lines.append(f"{num} {sid} {coef} " + " ".join(covs))
    if report.failed_cells:
        lines += ["", "failed cells"] + [f"{s} {e}" for s, e in report.failed_cells]
    return "\n".join(lines) + "\n"


def _print_summary(report: CoverageReport) -> None:
    sys.stdout.write(_summary_text(report))


class _Usage(Exception):
    pass


def _methods(text: str) -> tuple[Method, ...]:
    try:
        return parse_methods(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, default=0.10,
                        help="nominal miss probability; level = 1 - alpha (default 0.10)")
    common.add_argument("--b1", type=_positive, default=2000, help="first-level resamples")
    common.add_argument("--b2", type=_positive, default=2000, help="second-level resamples")
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--threads", type=_positive, default=1, help="worker processes")
    common.add_argument("--methods", type=_methods, default=STANDARD_METHODS,
                        help="comma-separated method names, 'standard' or 'all'")
    common.add_argument("--delimiter", default=",", help="input field delimiter")

    p = argparse.ArgumentParser(prog="calboot", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    ci = sub.add_parser("ci", parents=[common], help="intervals for one table")
    ci.add_argument("input", help="delimited text file with a header row")
    ci.add_argument("--response", required=True, help="response column name")
    ci.add_argument("--out", help="also write the table here")
    ci.set_defaults(fn=cmd_ci)

    sim = sub.add_parser("simulate", parents=[common], help="coverage over a scenario grid")
    sim.add_argument("--grid-config", help="JSON grid config (default: the 48-cell grid)")
    sim.add_argument("--reps", type=_positive, default=500, help="replications per cell")
    sim.add_argument("--out", required=True, help="report directory")
    sim.add_argument("--no-log", action="store_true", help="skip replications.csv")
    sim.set_defaults(fn=cmd_simulate)

    ss = sub.add_parser("subsample", parents=[common],
                        help="coverage over subsamples of a finite population")
    ss.add_argument("input", nargs="?", help="population table (default: built-in stand-in)")
    ss.add_argument("--response", help="response column name")
    ss.add_argument("--m", type=_positive, default=500, help="subsample size")
    ss.add_argument("--reps", type=_positive, default=1000, help="replications")
    ss.add_argument("--out", required=True, help="report directory")
    ss.add_argument("--no-log", action="store_true", help="skip replications.csv")
    ss.set_defaults(fn=cmd_subsample)

    rep = sub.add_parser("report", help="summarize and verify a report directory")
    rep.add_argument("input", help="directory written by simulate or subsample")
    rep.add_argument("--out", help="also write the summary here")
    rep.set_defaults(fn=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if hasattr(args, "alpha"):
            _level(args.alpha)
        return args.fn(args)
    except (_Usage, argparse.ArgumentTypeError) as exc:
        parser.error(str(exc))
    except ParseError as exc:
        print(f"calboot: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CalbootError, ValueError) as exc:
        print(f"calboot: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return 0


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["build_parser", "main", "read_table"]
