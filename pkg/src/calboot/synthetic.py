"""Simulation designs: one random covariate, a possibly nonlinear mean, three noise laws.

The estimand in every scenario is the population least-squares slope
``Cov(X, m(X)) / Var(X)``, which exists whether or not ``m`` is linear.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import NonFiniteEstimand
from .regress import Dataset
from .resample import Stream, StreamKey


class MeanFn(enum.Enum):
    LINEAR = "LINEAR"
    EXP = "EXP"
    CUBIC = "CUBIC"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self is MeanFn.LINEAR:
            return x
        if self is MeanFn.EXP:
            return np.exp(x)
        return x**3


class XDist(enum.Enum):
    STD_NORMAL = "STD_NORMAL"
    LOGNORMAL = "LOGNORMAL"


class Noise(enum.Enum):
    HOMOSK_NORMAL = "HOMOSK_NORMAL"
    HETERO_ABSX = "HETERO_ABSX"
    LOGNORMAL_NOISE = "LOGNORMAL_NOISE"
    # diagnostic only; never in the default grid
    ZERO = "ZERO"


@dataclass(frozen=True)
class PopulationSlope:
    value: float
    source: str  # "CLOSED_FORM" or "MONTE_CARLO"
    mc_se: float | None = None


def _closed_form(mean_fn: MeanFn, x_dist: XDist) -> float:
    if mean_fn is MeanFn.LINEAR:
        return 1.0
    if x_dist is XDist.STD_NORMAL:
        # E[X e^X] = E[e^X] = e^(1/2);  E[X^4] = 3
        return math.exp(0.5) if mean_fn is MeanFn.EXP else 3.0
    if mean_fn is MeanFn.CUBIC:
        # lognormal moments E[X^k] = e^(k^2/2)
        m = lambda k: math.exp(k * k / 2)  # noqa: E731
        return (m(4) - m(1) * m(3)) / (m(2) - m(1) ** 2)
    raise NonFiniteEstimand("E[X exp(X)] diverges for lognormal X")


def draw_x(x_dist: XDist, rng: np.random.Generator, size: int) -> np.ndarray:
    z = rng.standard_normal(size)
    return z if x_dist is XDist.STD_NORMAL else np.exp(z)


STRATA_SPAN = 9.0


def _stratified_normal(rng: np.random.Generator, m: int) -> tuple[np.ndarray, np.ndarray]:
    """One standard-normal draw per stratum and the strata probabilities.

    Strata are ``m`` equal-width cells of the latent normal on
    ``[-STRATA_SPAN, STRATA_SPAN]``, with the outermost cells extended to
    infinity, so the tails are resolved as finely as the centre.  Within a
    cell the draw is uniform in probability; the right half works with
    survival probabilities to keep precision.
    """
    edges = np.linspace(-STRATA_SPAN, STRATA_SPAN, m + 1)
    edges[0], edges[-1] = -np.inf, np.inf
    lo, hi = edges[:-1], edges[1:]
    right = (lo + hi) > 0  # inf - inf is never formed: m >= 2
    u = rng.random(m)
    z = np.empty(m)
    w = np.empty(m)
    # left half: cumulative probabilities
    cl, ch = ndtr(lo[~right]), ndtr(hi[~right])
    w[~right] = ch - cl
    z[~right] = ndtri(np.maximum(cl + u[~right] * (ch - cl), np.finfo(float).tiny))
    # right half: survival probabilities
    sl, sh = ndtr(-lo[right]), ndtr(-hi[right])
    w[right] = sl - sh
    z[right] = -ndtri(np.maximum(sh + u[right] * (sl - sh), np.finfo(float).tiny))
    return z, w


def mc_slope(mean_fn: MeanFn, x_dist: XDist, draws: int = 10**7, seed: int = 0,
             replicates: int = 10) -> PopulationSlope:
    """Stratified Monte Carlo slope.

    ``replicates`` independent passes each draw ``draws / replicates`` points,
    one per stratum of the latent normal (see :func:`_stratified_normal`).  The
    value is the mean of the per-pass weighted slopes and ``mc_se`` their
    standard error.
    """
    if mean_fn is MeanFn.EXP and x_dist is XDist.LOGNORMAL:
        raise NonFiniteEstimand("E[X exp(X)] diverges for lognormal X")
    rng = np.random.Generator(np.random.PCG64(seed))
    m = max(draws // replicates, 2)
    slopes = np.empty(replicates)
    for k in range(replicates):
        z, w = _stratified_normal(rng, m)
        w = w / w.sum()
        x = z if x_dist is XDist.STD_NORMAL else np.exp(z)
        fx = mean_fn(x)
        dx = x - w @ x
        slopes[k] = (w @ (dx * (fx - w @ fx))) / (w @ (dx * dx))
    se = float(slopes.std(ddof=1) / math.sqrt(replicates))
    return PopulationSlope(float(slopes.mean()), "MONTE_CARLO", se)


def population_slope(mean_fn: MeanFn, x_dist: XDist, method: str = "closed",
                     draws: int = 10**7, seed: int = 0) -> PopulationSlope:
    """Best-linear-approximation slope of ``m(X)`` on ``X``.

    Noise never moves it: the homoskedastic and ``|X|``-scaled noises have mean
    zero given X, and the lognormal noise only shifts the intercept.
    """
    if method == "closed":
        return PopulationSlope(_closed_form(mean_fn, x_dist), "CLOSED_FORM")
    if method == "mc":
        return mc_slope(mean_fn, x_dist, draws, seed)
    raise ValueError(f"unknown method {method!r}")


def sandwich_variance_mc(mean_fn: MeanFn, x_dist: XDist, noise: Noise,
                         draws: int, seed: int = 0) -> float:
    """Monte Carlo ``E[(X - EX)^2 (Y - a - bX)^2] / Var(X)^2`` (asymptotic n*Var(slope))."""
    rng = np.random.Generator(np.random.PCG64(seed))
    x = draw_x(x_dist, rng, draws)
    y = mean_fn(x) + draw_noise(noise, x, rng)
    dx = x - x.mean()
    b = (dx @ (y - y.mean())) / (dx @ dx)
    r = (y - y.mean()) - b * dx
    vx = (dx @ dx) / draws
    return float(np.mean(dx * dx * r * r) / vx**2)


def draw_noise(noise: Noise, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if noise is Noise.ZERO:
        return np.zeros_like(x)
    z = rng.standard_normal(x.shape[0])
    if noise is Noise.HOMOSK_NORMAL:
        return z
    if noise is Noise.HETERO_ABSX:
        return np.abs(x) * z
    return np.exp(z)


@dataclass(frozen=True)
class Scenario:
    n: int
    mean_fn: MeanFn
    x_dist: XDist
    noise: Noise
    true_slope: float = math.nan

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("scenario sample size must be at least 3")
        if math.isnan(self.true_slope):
            try:
                slope = _closed_form(self.mean_fn, self.x_dist)
            except NonFiniteEstimand:
                slope = math.inf
            object.__setattr__(self, "true_slope", slope)

    @property
    def has_estimand(self) -> bool:
        """False for designs whose population slope diverges; these cannot be simulated."""
        return math.isfinite(self.true_slope)

    @property
    def scenario_id(self) -> str:
        return f"n{self.n}-{self.mean_fn.value}-{self.x_dist.value}-{self.noise.value}"


def draw_scenario(s: Scenario, stream: Stream) -> Dataset:
    rng = stream.numpy()
    x = draw_x(s.x_dist, rng, s.n)
    y = s.mean_fn(x) + draw_noise(s.noise, x, rng)
    return Dataset.from_covariates(x, y, ("x",))


def draw_scenario_at(s: Scenario, master_seed: int, cell_id: int, rep: int) -> Dataset:
    """Replication ``rep`` of grid cell ``cell_id``: stream path ``(2, cell_id, rep)``."""
    return draw_scenario(s, Stream(StreamKey(master_seed, (2, cell_id, rep))))


DEFAULT_EXCLUDE = (
    {"mean_fn": "EXP", "x_dist": "LOGNORMAL"},
    {"mean_fn": "CUBIC", "x_dist": "LOGNORMAL"},
)


@dataclass(frozen=True)
class GridConfig:
    """Full factorial over the four factors minus partial-match exclusions.

    Each exclusion is a mapping from factor name (``n``, ``mean_fn``,
    ``x_dist``, ``noise``) to a value; a scenario is dropped when it matches
    every entry of some exclusion.
    """

    n: tuple[int, ...] = (32, 64, 128, 256)
    mean_fn: tuple[MeanFn, ...] = (MeanFn.LINEAR, MeanFn.EXP, MeanFn.CUBIC)
    x_dist: tuple[XDist, ...] = (XDist.STD_NORMAL, XDist.LOGNORMAL)
    noise: tuple[Noise, ...] = (Noise.HOMOSK_NORMAL, Noise.HETERO_ABSX, Noise.LOGNORMAL_NOISE)
    exclude: tuple[dict, ...] = field(default=DEFAULT_EXCLUDE)

    @classmethod
    def from_dict(cls, d: dict) -> GridConfig:
        unknown = set(d) - {"n", "mean_fn", "x_dist", "noise", "exclude"}
        if unknown:
            raise ValueError(f"unknown grid config keys: {sorted(unknown)}")
        kw: dict = {}
        if "n" in d:
            kw["n"] = tuple(int(v) for v in d["n"])
        for key, enum_cls in (("mean_fn", MeanFn), ("x_dist", XDist), ("noise", Noise)):
            if key in d:
                kw[key] = tuple(enum_cls[str(v).upper()] for v in d[key])
        if "exclude" in d:
            kw["exclude"] = tuple(dict(e) for e in d["exclude"])
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> GridConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "n": list(self.n),
            "mean_fn": [m.value for m in self.mean_fn],
            "x_dist": [m.value for m in self.x_dist],
            "noise": [m.value for m in self.noise],
            "exclude": [dict(e) for e in self.exclude],
        }


def _excluded(values: dict, exclude) -> bool:
    return any(all(str(values[k]) == str(v) for k, v in e.items()) for e in exclude)


def scenario_grid(config: GridConfig | None = None) -> list[Scenario]:
    config = config or GridConfig()
    out = []
    for n in config.n:
        for mean_fn in config.mean_fn:
            for x_dist in config.x_dist:
                for noise in config.noise:
                    values = {"n": n, "mean_fn": mean_fn.value, "x_dist": x_dist.value,
                              "noise": noise.value}
                    if _excluded(values, config.exclude):
                        continue
                    out.append(Scenario(n, mean_fn, x_dist, noise))
    return out
