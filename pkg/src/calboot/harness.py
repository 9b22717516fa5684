"""Monte Carlo coverage studies and their on-disk reports.

Randomness layout under the study's master seed:

* ``(2, cell, rep)``  simulated dataset of replication ``rep`` in grid cell ``cell``
* ``(3, cell, rep)``  master seed of that replication's bootstrap tree
* ``(4, rep)``        subsample drawn from a finite population
* ``(5, rep)``        master seed of that subsample's bootstrap tree

Work items are ``(cell, rep)`` pairs; they share nothing, so a process pool of
any size returns the same records, which are merged in item order.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CalbootError, NonFiniteEstimand
from .intervals import BootConfig, BootstrapRun, DegenerateBias, Method
from .regress import Dataset, fit_ols
from .resample import Stream, StreamKey
from .synthetic import Scenario, draw_scenario

ANCHOR = Method.PERC_CAL_2

CELL_COLUMNS = ("scenario_id", "n", "mean_fn", "x_dist", "noise", "method", "level",
                "coverage", "mc_se", "avg_length", "failures", "coef", "replications")
RECORD_COLUMNS = ("scenario_id", "rep", "method", "coef", "lower", "upper", "estimate",
                  "truth", "covered", "length", "error")


def fmt(x) -> str:
    """Shortest round-trip text for floats; the basis of byte-stable reports."""
    if isinstance(x, float):
        return repr(x)
    return str(x)


@dataclass(frozen=True)
class ReplicationRecord:
    scenario_id: str
    rep: int
    method: str
    coef: str
    lower: float
    upper: float
    estimate: float
    truth: float
    covered: int  # 1 covered, 0 missed, -1 failed
    length: float
    error: str = ""


@dataclass(frozen=True)
class CoverageCell:
    scenario_id: str
    method: str
    level: float
    coverage: float
    avg_length: float
    mc_se: float
    replications: int
    failures: int = 0
    coef: str = "x"
    n: int = 0
    mean_fn: str = ""
    x_dist: str = ""
    noise: str = ""

    @property
    def cover_count(self) -> int:
        return int(round(self.coverage * self.replications)) if self.replications else 0

    @property
    def key(self) -> tuple[str, str]:
        return self.scenario_id, self.coef

    def row(self) -> dict:
        return {c: fmt(getattr(self, c)) for c in CELL_COLUMNS if c != "level"} | {
            "level": fmt(self.level)}


def _record(sid, rep, method, coef, truth, est=None, error="") -> ReplicationRecord:
    if est is None:
        nan = math.nan
        return ReplicationRecord(sid, rep, method.value, coef, nan, nan, nan, truth, -1, nan,
                                 error)
    return ReplicationRecord(sid, rep, method.value, coef, est.lower, est.upper, est.estimate,
                             truth, int(est.covers(truth)), est.length)


def replicate(data: Dataset, truths: Sequence[float], coefs: Sequence[int],
              methods: Sequence[Method], level: float, cfg: BootConfig,
              sid: str, rep: int) -> list[ReplicationRecord]:
    """Intervals for every (coefficient, method) on one dataset; failures become records."""
    names = data.coef_names()
    out = []
    run = BootstrapRun(data, cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateBias)
        for j, truth in zip(coefs, truths):
            for m in methods:
                try:
                    est = run.interval(m, j, level)
                except CalbootError as exc:
                    out.append(_record(sid, rep, m, names[j], truth, error=type(exc).__name__))
                else:
                    out.append(_record(sid, rep, m, names[j], truth, est))
    return out


def _scenario_rep(args) -> list[ReplicationRecord]:
    s, cell_id, rep, methods, level, cfg = args
    data_key = StreamKey(cfg.master_seed, (2, cell_id, rep))
    boot = BootConfig(cfg.b1, cfg.b2, StreamKey(cfg.master_seed, (3, cell_id, rep)).state(),
                      cfg.max_redraws)
    try:
        data = draw_scenario(s, Stream(data_key))
    except (CalbootError, ValueError) as exc:
        return [_record(s.scenario_id, rep, m, "x", s.true_slope, error=type(exc).__name__)
                for m in methods]
    return replicate(data, [s.true_slope], [1], methods, level, boot, s.scenario_id, rep)


def _pool_map(fn, items: list, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (threads * 8))
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items, chunksize=chunk))


def aggregate(records: Iterable[ReplicationRecord], level: float,
              factors: dict[str, dict] | None = None) -> list[CoverageCell]:
    """Per (scenario, coefficient, method) coverage from replication records.

    Coverage and length average over successful replications only; failures are
    counted separately.  Output order follows first appearance in ``records``.
    """
    groups: dict[tuple[str, str, str], list[ReplicationRecord]] = defaultdict(list)
    for r in records:
        groups[(r.scenario_id, r.coef, r.method)].append(r)
    factors = factors or {}
    cells = []
    for (sid, coef, method), recs in groups.items():
        ok = [r for r in recs if r.covered >= 0]
        fails = len(recs) - len(ok)
        if ok:
            cov = sum(r.covered for r in ok) / len(ok)
            length = math.fsum(r.length for r in ok) / len(ok)
            se = math.sqrt(cov * (1.0 - cov) / len(ok))
        else:
            cov = length = se = math.nan
        cells.append(CoverageCell(sid, method, level, cov, length, se, len(ok), fails, coef,
                                  **factors.get(sid, {})))
    return cells


@dataclass
class CoverageReport:
    level: float
    cells: list[CoverageCell]
    records: list[ReplicationRecord] = field(default_factory=list)
    failed_cells: list[tuple[str, str]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def methods(self) -> list[str]:
        return list(dict.fromkeys(c.method for c in self.cells))

    def cell(self, scenario_id: str, method: str | Method, coef: str | None = None) -> CoverageCell:
        method = method.value if isinstance(method, Method) else method
        for c in self.cells:
            if c.scenario_id == scenario_id and c.method == method and (coef is None or c.coef == coef):
                return c
        raise KeyError((scenario_id, method, coef))

    def mad(self) -> dict[str, float]:
        """Mean absolute deviation of coverage from the target, per method."""
        out = {}
        for m in self.methods():
            devs = [abs(c.coverage - self.level) for c in self.cells
                    if c.method == m and not math.isnan(c.coverage)]
            out[m] = math.fsum(devs) / len(devs) if devs else math.nan
        return out

    def mean_length(self) -> dict[str, float]:
        out = {}
        for m in self.methods():
            ls = [c.avg_length for c in self.cells if c.method == m and not math.isnan(c.avg_length)]
            out[m] = math.fsum(ls) / len(ls) if ls else math.nan
        return out

    def numbering(self, anchor: Method = ANCHOR) -> dict[tuple[str, str], int]:
        """Scenario numbers 1..N ordered by the anchor method's coverage, ascending.

        Ties and cells where the anchor is missing keep their report order.
        """
        keys = list(dict.fromkeys(c.key for c in self.cells))
        cov = {c.key: c.coverage for c in self.cells if c.method == anchor.value}
        order = sorted(range(len(keys)),
                       key=lambda i: (math.isnan(cov.get(keys[i], math.nan)),
                                      cov.get(keys[i], 0.0), i))
        return {keys[i]: rank + 1 for rank, i in enumerate(order)}

    def summary(self) -> dict:
        numbering = self.numbering()
        return {
            "level": self.level,
            "mad": self.mad(),
            "mean_length": self.mean_length(),
            "scenario_numbering": [
                {"number": num, "scenario_id": sid, "coef": coef}
                for (sid, coef), num in sorted(numbering.items(), key=lambda kv: kv[1])
            ],
            "failed_cells": [{"scenario_id": s, "error": e} for s, e in self.failed_cells],
            "meta": self.meta,
        }

    def write(self, outdir: str | Path, log: bool = True) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "cells.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, CELL_COLUMNS, lineterminator="\n")
            w.writeheader()
            for c in self.cells:
                w.writerow(c.row())
        if log:
            with open(out / "replications.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(RECORD_COLUMNS)
                for r in self.records:
                    w.writerow([fmt(getattr(r, c)) for c in RECORD_COLUMNS])
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True)
                                          + "\n")

    @classmethod
    def read(cls, outdir: str | Path) -> CoverageReport:
        out = Path(outdir)
        summary = json.loads((out / "summary.json").read_text())
        level = float(summary["level"])
        cells = []
        types = {f.name: f.type for f in fields(CoverageCell)}
        with open(out / "cells.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                kw = {}
                for k, v in row.items():
                    t = types[k]
                    kw[k] = float(v) if t == "float" else int(v) if t == "int" else v
                cells.append(CoverageCell(**kw))
        records = read_records(out / "replications.csv") if (out / "replications.csv").exists() else []
        failed = [(d["scenario_id"], d["error"]) for d in summary.get("failed_cells", [])]
        return cls(level, cells, records, failed, summary.get("meta", {}))


def read_records(path: str | Path) -> list[ReplicationRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ReplicationRecord(
                row["scenario_id"], int(row["rep"]), row["method"], row["coef"],
                float(row["lower"]), float(row["upper"]), float(row["estimate"]),
                float(row["truth"]), int(row["covered"]), float(row["length"]), row["error"]))
    return out


def _factors(s: Scenario) -> dict:
    return {"n": s.n, "mean_fn": s.mean_fn.value, "x_dist": s.x_dist.value,
            "noise": s.noise.value}


def run_cell(s: Scenario, methods: Sequence[Method], level: float, reps: int,
             cfg: BootConfig, cell_id: int = 0, threads: int = 1) -> list[CoverageCell]:
    """Coverage of each method's slope interval over ``reps`` simulated datasets."""
    return _run_cells([(cell_id, s)], methods, level, reps, cfg, threads).cells


def _run_cells(cells: list[tuple[int, Scenario]], methods, level, reps, cfg, threads):
    if reps < 2:
        raise ValueError("need at least 2 replications")
    methods = tuple(methods)
    good, failed = [], []
    for cid, s in cells:
        if s.has_estimand:
            good.append((cid, s))
        else:
            failed.append((s.scenario_id, NonFiniteEstimand.__name__))
    items = [(s, cid, r, methods, level, cfg) for cid, s in good for r in range(reps)]
    records = [rec for batch in _pool_map(_scenario_rep, items, threads) for rec in batch]
    factors = {s.scenario_id: _factors(s) for _, s in good}
    meta = {"b1": cfg.b1, "b2": cfg.b2, "master_seed": cfg.master_seed, "reps": reps,
            "methods": [m.value for m in methods]}
    return CoverageReport(level, aggregate(records, level, factors), records, failed, meta)


def run_grid(grid: Sequence[Scenario], methods: Sequence[Method], level: float, reps: int,
             cfg: BootConfig, threads: int = 1) -> CoverageReport:
    """Every cell of ``grid`` (cell id = position in the grid)."""
    return _run_cells(list(enumerate(grid)), methods, level, reps, cfg, threads)


@dataclass(frozen=True)
class SubsampleStudySpec:
    population: Dataset
    m: int
    reps: int
    methods: tuple[Method, ...]
    level: float = 0.90
    coefs: tuple[int, ...] | None = None
    label: str = "subsample"

    def __post_init__(self):
        if not 2 <= self.m <= self.population.n:
            raise ValueError(f"subsample size {self.m} outside [2, {self.population.n}]")
        if self.reps < 2:
            raise ValueError("need at least 2 replications")


def subsample_rows(n: int, m: int, master_seed: int, rep: int) -> np.ndarray:
    """Rows of replication ``rep``: ``m`` of ``n`` without replacement, stream ``(4, rep)``."""
    return Stream(StreamKey(master_seed, (4, rep))).numpy().choice(n, size=m, replace=False)


def _subsample_rep(args) -> list[ReplicationRecord]:
    spec, truths, coefs, rep, cfg = args
    rows = subsample_rows(spec.population.n, spec.m, cfg.master_seed, rep)
    boot = BootConfig(cfg.b1, cfg.b2, StreamKey(cfg.master_seed, (5, rep)).state(),
                      cfg.max_redraws)
    data = spec.population.take(rows)
    return replicate(data, truths, coefs, spec.methods, spec.level, boot, spec.label, rep)


def subsample_study(spec: SubsampleStudySpec, cfg: BootConfig, threads: int = 1) -> CoverageReport:
    """Coverage of the full-population least-squares coefficients over random subsets.

    Each replication draws ``m`` rows without replacement, independently of the
    other replications.
    """
    truth_fit = fit_ols(spec.population)
    coefs = spec.coefs if spec.coefs is not None else tuple(range(spec.population.p + 1))
    truths = [float(truth_fit.beta_hat[j]) for j in coefs]
    items = [(spec, truths, coefs, r, cfg) for r in range(spec.reps)]
    records = [rec for batch in _pool_map(_subsample_rep, items, threads) for rec in batch]
    factors = {spec.label: {"n": spec.m, "mean_fn": "", "x_dist": "", "noise": ""}}
    meta = {"b1": cfg.b1, "b2": cfg.b2, "master_seed": cfg.master_seed, "reps": spec.reps,
            "m": spec.m, "population_n": spec.population.n,
            "methods": [m.value for m in spec.methods],
            "truth": dict(zip(spec.population.coef_names(), map(float, truth_fit.beta_hat)))}
    return CoverageReport(spec.level, aggregate(records, spec.level, factors), records, [], meta)


def as_dicts(cells: Iterable[CoverageCell]) -> list[dict]:
    return [asdict(c) for c in cells]


__all__ = [
    "CELL_COLUMNS",
    "RECORD_COLUMNS",
    "CoverageCell",
    "CoverageReport",
    "ReplicationRecord",
    "SubsampleStudySpec",
    "aggregate",
    "read_records",
    "replicate",
    "run_cell",
    "run_grid",
    "subsample_rows",
    "subsample_study",
]
