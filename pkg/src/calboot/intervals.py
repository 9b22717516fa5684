"""Confidence intervals for a single regression coefficient.

Every bootstrap method draws from the same keyed resampling tree: first-level
resample ``j`` uses stream path ``(1, j)`` and its ``k``-th second-level resample
uses ``(1, j, k)``, both under ``BootConfig.master_seed``.  Methods therefore
agree on shared draws, and a :class:`BootstrapRun` can compute the expensive
nested level once and serve every method from it.

Bootstrap methods take the point estimate from the same compiled fit that
produces the resample estimates (not from the QR fit), so exact ties between
``theta_hat`` and resample estimates are resolved consistently.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.special import ndtr, ndtri

from . import _kernels as K
from .errors import SingularDesign, TooManyDegenerateResamples
from .regress import Dataset, SeVariant, fit_ols, se_for
from .resample import child_hash, ecdf_position, empirical_quantile, root_hash

BOOT_CONTEXT = 1

Sided = Literal["one", "two"]


class Method(enum.Enum):
    Z = "Z"
    SAND_HC0 = "SAND_HC0"
    SAND_HC1 = "SAND_HC1"
    SAND_HC2 = "SAND_HC2"
    SAND_HC3 = "SAND_HC3"
    SAND_HC4 = "SAND_HC4"
    SAND_HC5 = "SAND_HC5"
    PERC = "PERC"
    STUD = "STUD"
    BOOT_T = "BOOT_T"
    BCA = "BCA"
    PERC_CAL_2 = "PERC_CAL_2"
    PERC_CAL_1 = "PERC_CAL_1"

    @property
    def variant(self) -> SeVariant | None:
        if self.name.startswith("SAND_"):
            return SeVariant[self.name[5:]]
        return None

    @property
    def is_bootstrap(self) -> bool:
        return self in _BOOTSTRAP_METHODS

    @property
    def is_nested(self) -> bool:
        return self in (Method.BOOT_T, Method.PERC_CAL_1, Method.PERC_CAL_2)


_BOOTSTRAP_METHODS = frozenset(
    {Method.PERC, Method.STUD, Method.BOOT_T, Method.BCA, Method.PERC_CAL_1, Method.PERC_CAL_2}
)

# default comparison set: z, sand1..sand5, stud, boot-t, BCa, perc, perc-cal
STANDARD_METHODS = (
    Method.Z,
    Method.SAND_HC1,
    Method.SAND_HC2,
    Method.SAND_HC3,
    Method.SAND_HC4,
    Method.SAND_HC5,
    Method.STUD,
    Method.BOOT_T,
    Method.BCA,
    Method.PERC,
    Method.PERC_CAL_2,
)


def parse_methods(spec: str) -> tuple[Method, ...]:
    """Comma-separated method names (case-insensitive); ``standard`` and ``all`` expand."""
    out: list[Method] = []
    for tok in (t.strip() for t in spec.split(",")):
        if not tok:
            continue
        low = tok.lower()
        if low == "standard":
            out.extend(STANDARD_METHODS)
        elif low == "all":
            out.extend(Method)
        else:
            try:
                out.append(Method[tok.upper().replace("-", "_")])
            except KeyError:
                raise ValueError(f"unknown method {tok!r}") from None
    return tuple(dict.fromkeys(out))


@dataclass(frozen=True)
class BootConfig:
    b1: int = 2000
    b2: int = 2000
    master_seed: int = 0
    max_redraws: int = 100

    def __post_init__(self):
        if self.b1 < 2:
            raise ValueError("b1 must be at least 2")
        if self.b2 < 1:
            raise ValueError("b2 must be positive")
        if self.max_redraws < 0:
            raise ValueError("max_redraws must be nonnegative")

    def require_nested(self):
        if self.b2 < 2:
            raise ValueError("b2 must be at least 2 for second-level methods")


@dataclass(frozen=True)
class IntervalEstimate:
    method: Method
    level: float
    lower: float
    upper: float
    estimate: float
    coef_index: int = 1
    lambda_hat: float | None = None
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")
        is_cal = self.method in (Method.PERC_CAL_1, Method.PERC_CAL_2)
        if is_cal != (self.lambda_hat is not None):
            raise ValueError("lambda_hat is recorded exactly for perc-cal intervals")

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    @property
    def length(self) -> float:
        """Width; for a one-sided bound, the distance from the estimate to the bound."""
        if math.isinf(self.lower):
            return self.upper - self.estimate
        return self.upper - self.lower


@dataclass(frozen=True)
class BootstrapHistograms:
    theta_hat: float
    first_level: np.ndarray
    depths: np.ndarray


class DegenerateBias(UserWarning):
    """Every bootstrap estimate lies on one side of the point estimate."""


def _check_level(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    return 1.0 - level


def _fsum_sd(values) -> float:
    v = [float(x) for x in values]
    m = math.fsum(v) / len(v)
    return math.sqrt(math.fsum((x - m) ** 2 for x in v) / (len(v) - 1))


# endpoint rules on already-computed bootstrap output


def percentile_endpoints(estimates, level: float) -> tuple[float, float]:
    alpha = _check_level(level)
    return (
        empirical_quantile(estimates, alpha / 2),
        empirical_quantile(estimates, 1 - alpha / 2),
    )


def studentized_endpoints(theta_hat: float, se: float, pivots, level: float) -> tuple[float, float]:
    """``[theta - se * t_(1-a/2), theta - se * t_(a/2)]`` over the pivot sample."""
    alpha = _check_level(level)
    t_hi = empirical_quantile(pivots, 1 - alpha / 2)
    t_lo = empirical_quantile(pivots, alpha / 2)
    return theta_hat - se * t_hi, theta_hat - se * t_lo


def bca_constants(theta_hat: float, estimates, jackknife_values) -> tuple[float, float]:
    """Bias correction ``z0`` and acceleration ``a``.

    ``z0`` is infinite when no (or every) estimate falls below ``theta_hat``.
    """
    est = np.asarray(estimates, dtype=np.float64)
    frac = np.count_nonzero(est < theta_hat) / est.size
    z0 = float(ndtri(frac))
    jk = [float(v) for v in jackknife_values]
    mean = math.fsum(jk) / len(jk)
    dev = [mean - v for v in jk]
    den = math.fsum(d * d for d in dev)
    a = 0.0 if den == 0.0 else math.fsum(d**3 for d in dev) / (6.0 * den**1.5)
    return z0, a


def bca_levels(z0: float, a: float, level: float, b: int) -> tuple[float, float]:
    """Adjusted percentile levels, kept inside ``[1/(2b), 1 - 1/(2b)]``."""
    alpha = _check_level(level)
    out = []
    for zq in (ndtri(alpha / 2), ndtri(1 - alpha / 2)):
        s = z0 + zq
        out.append(float(ndtr(z0 + s / (1.0 - a * s))))
    lo, hi = 0.5 / b, 1.0 - 0.5 / b
    return tuple(min(max(q, lo), hi) if math.isfinite(q) else lo for q in out)  # type: ignore[return-value]


def calibrate_lambda(hist: BootstrapHistograms, alpha: float, sided: Sided, b2: int) -> float:
    """Calibrated percentile level from the depth statistics.

    Two-sided: the ``(1 - alpha)`` quantile of ``max(q, 1 - q)``; one-sided: of
    ``q``.  Clamped into ``[1/2 + 1/(2 b2), 1 - 1/(2 b2)]``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    q = np.asarray(hist.depths, dtype=np.float64)
    if sided == "two":
        stat = np.maximum(q, 1.0 - q)
    elif sided == "one":
        stat = q
    else:
        raise ValueError(f"sided must be 'one' or 'two', got {sided!r}")
    lam = empirical_quantile(stat, 1.0 - alpha)
    return min(max(lam, 0.5 + 0.5 / b2), 1.0 - 0.5 / b2)


def depths_from(theta_hat: float, second_level: np.ndarray) -> np.ndarray:
    """Row-wise ECDF position of ``theta_hat`` in each second-level histogram."""
    second_level = np.asarray(second_level)
    return np.count_nonzero(second_level <= theta_hat, axis=1) / second_level.shape[1]


class BootstrapRun:
    """Lazily computed resampling tree for one dataset and configuration."""

    def __init__(self, data: Dataset, cfg: BootConfig):
        self.data = data
        self.cfg = cfg
        z = np.ascontiguousarray(data.x_rows[:, 1:])
        self._zc, self._yc, self._f, self._gmean = K.prepare(z, data.y)
        self._ctx = np.uint64(child_hash(root_hash(cfg.master_seed), BOOT_CONTEXT))
        self._stud: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._boot_t: dict[int, np.ndarray] = {}

    @cached_property
    def _identity(self):
        beta, _, ok = K.fit_subset(self._zc, self._yc, self._f, self._gmean,
                                   np.arange(self.data.n), -1)
        if not ok:
            raise SingularDesign("original design fails the pivot test")
        return beta

    def theta_hat(self, j: int) -> float:
        return float(self._identity[j])

    def hc0_se(self, j: int) -> float:
        _, se, ok = K.fit_subset(self._zc, self._yc, self._f, self._gmean,
                                 np.arange(self.data.n), j)
        if not ok:
            raise SingularDesign("original design fails the pivot test")
        return float(se)

    def _fail(self, slot: int, what: str):
        raise TooManyDegenerateResamples(
            f"{what} slot {slot} stayed degenerate after {self.cfg.max_redraws} redraws"
        )

    @cached_property
    def first_level(self) -> np.ndarray:
        """``B1 x k`` first-level estimates."""
        if "nested" in self.__dict__:
            return self.nested[0]
        theta, _, _, failed = K.first_level(self._zc, self._yc, self._f, self._gmean,
                                            self._ctx, self.cfg.b1, self.cfg.max_redraws, -1)
        if failed >= 0:
            self._fail(failed, "first-level")
        return theta

    @cached_property
    def nested(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(first-level ``B1 x k``, second-level ``B1 x B2 x k``, outer attempts)."""
        self.cfg.require_nested()
        theta1, theta2, attempts, failed = K.nested(self._f, self._gmean, self._ctx,
                                                    self.cfg.b1, self.cfg.b2,
                                                    self.cfg.max_redraws)
        if failed >= 0:
            self._fail(failed, "nested")
        return theta1, theta2, attempts

    def studentized_draws(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """First-level estimates of coefficient ``j`` and their HC0 SEs (zero SE redrawn)."""
        if j not in self._stud:
            theta, se, _, failed = K.first_level(self._zc, self._yc, self._f, self._gmean,
                                                 self._ctx, self.cfg.b1,
                                                 self.cfg.max_redraws, j)
            if failed >= 0:
                self._fail(failed, "studentized")
            self._stud[j] = (theta[:, j].copy(), se)
        return self._stud[j]

    def boot_t_draws(self, j: int) -> np.ndarray:
        """Pivots ``(theta*_b - theta_hat) / sd(theta**_b)`` for coefficient ``j``."""
        if j not in self._boot_t:
            theta1, theta2, attempts = self.nested
            th = self.theta_hat(j)
            pivots = np.empty(self.cfg.b1)
            for b in range(self.cfg.b1):
                outer, inner = theta1[b, j], theta2[b, :, j]
                if np.all(inner == inner[0]):
                    t1, t2, _, status = K.redo_slot(self._f, self._gmean, self._ctx, b,
                                                    attempts[b] + 1, self.cfg.b2,
                                                    self.cfg.max_redraws, j)
                    if status != K.OK:
                        self._fail(b, "bootstrap-t")
                    outer, inner = t1[j], t2[:, j]
                pivots[b] = (outer - th) / _fsum_sd(inner)
            self._boot_t[j] = pivots
        return self._boot_t[j]

    @cached_property
    def jackknife(self) -> np.ndarray:
        theta, failed = K.jackknife(self._f, self._gmean)
        if failed >= 0:
            raise SingularDesign(f"leave-one-out design without row {failed} is singular")
        return theta

    def histograms(self, j: int) -> BootstrapHistograms:
        theta1, theta2, _ = self.nested
        th = self.theta_hat(j)
        return BootstrapHistograms(th, theta1[:, j].copy(), depths_from(th, theta2[:, :, j]))

    # interval constructors

    def interval(self, method: Method, j: int, level: float) -> IntervalEstimate:
        if method is Method.Z:
            return z_interval(self.data, j, level)
        if method.variant is not None:
            return sandwich_interval(self.data, j, level, method.variant)
        build = {
            Method.PERC: self._percentile,
            Method.STUD: self._studentized,
            Method.BOOT_T: self._boot_t_interval,
            Method.BCA: self._bca,
            Method.PERC_CAL_2: lambda j, level: self._perc_cal(j, level, "two"),
            Method.PERC_CAL_1: lambda j, level: self._perc_cal(j, level, "one"),
        }[method]
        return build(j, level)

    def _percentile(self, j, level):
        lo, hi = percentile_endpoints(self.first_level[:, j], level)
        return IntervalEstimate(Method.PERC, level, lo, hi, self.theta_hat(j), j)

    def _studentized(self, j, level):
        th, se = self.theta_hat(j), self.hc0_se(j)
        if se == 0.0:
            return IntervalEstimate(Method.STUD, level, th, th, th, j)
        theta, se_star = self.studentized_draws(j)
        lo, hi = studentized_endpoints(th, se, (theta - th) / se_star, level)
        return IntervalEstimate(Method.STUD, level, lo, hi, th, j)

    def _boot_t_interval(self, j, level):
        th, se = self.theta_hat(j), self.hc0_se(j)
        if se == 0.0:
            return IntervalEstimate(Method.BOOT_T, level, th, th, th, j)
        lo, hi = studentized_endpoints(th, se, self.boot_t_draws(j), level)
        return IntervalEstimate(Method.BOOT_T, level, lo, hi, th, j)

    def _bca(self, j, level):
        th = self.theta_hat(j)
        est = self.first_level[:, j]
        z0, a = bca_constants(th, est, self.jackknife[:, j])
        if not math.isfinite(z0):
            warnings.warn(DegenerateBias("bootstrap estimates all on one side; using percentile"),
                          stacklevel=3)
            lo, hi = percentile_endpoints(est, level)
            return IntervalEstimate(Method.BCA, level, lo, hi, th, j, flags=("degenerate_bias",))
        q_lo, q_hi = bca_levels(z0, a, level, est.size)
        return IntervalEstimate(Method.BCA, level, empirical_quantile(est, q_lo),
                                empirical_quantile(est, q_hi), th, j)

    def _perc_cal(self, j, level, sided: Sided):
        alpha = _check_level(level)
        hist = self.histograms(j)
        lam = calibrate_lambda(hist, alpha, sided, self.cfg.b2)
        hi = empirical_quantile(hist.first_level, lam)
        if sided == "two":
            lo = empirical_quantile(hist.first_level, 1.0 - lam)
            method = Method.PERC_CAL_2
        else:
            lo = -math.inf
            method = Method.PERC_CAL_1
        return IntervalEstimate(method, level, lo, hi, hist.theta_hat, j, lambda_hat=lam)


def z_interval(data: Dataset, j: int, level: float) -> IntervalEstimate:
    alpha = _check_level(level)
    fit = fit_ols(data)
    half = float(ndtri(1 - alpha / 2)) * se_for(fit, data, SeVariant.CLASSICAL, j)
    b = float(fit.beta_hat[j])
    return IntervalEstimate(Method.Z, level, b - half, b + half, b, j)


def sandwich_interval(data: Dataset, j: int, level: float, variant: SeVariant) -> IntervalEstimate:
    if variant is SeVariant.CLASSICAL:
        raise ValueError("use z_interval for the classical standard error")
    alpha = _check_level(level)
    fit = fit_ols(data)
    half = float(ndtri(1 - alpha / 2)) * se_for(fit, data, variant, j)
    b = float(fit.beta_hat[j])
    return IntervalEstimate(Method["SAND_" + variant.name], level, b - half, b + half, b, j)


def percentile_interval(data: Dataset, j: int, level: float, cfg: BootConfig) -> IntervalEstimate:
    return BootstrapRun(data, cfg).interval(Method.PERC, j, level)


def studentized_interval(data: Dataset, j: int, level: float, cfg: BootConfig) -> IntervalEstimate:
    return BootstrapRun(data, cfg).interval(Method.STUD, j, level)


def boot_t_interval(data: Dataset, j: int, level: float, cfg: BootConfig) -> IntervalEstimate:
    return BootstrapRun(data, cfg).interval(Method.BOOT_T, j, level)


def bca_interval(data: Dataset, j: int, level: float, cfg: BootConfig) -> IntervalEstimate:
    return BootstrapRun(data, cfg).interval(Method.BCA, j, level)


def compute_histograms(data: Dataset, j: int, cfg: BootConfig) -> BootstrapHistograms:
    return BootstrapRun(data, cfg).histograms(j)


def perc_cal_interval(
    data: Dataset, j: int, level: float, cfg: BootConfig, sided: Sided = "two"
) -> IntervalEstimate:
    method = Method.PERC_CAL_2 if sided == "two" else Method.PERC_CAL_1
    return BootstrapRun(data, cfg).interval(method, j, level)


def compute_interval(
    data: Dataset, j: int, level: float, method: Method, cfg: BootConfig | None = None
) -> IntervalEstimate:
    if method.is_bootstrap and cfg is None:
        raise ValueError(f"{method.value} needs a BootConfig")
    return BootstrapRun(data, cfg or BootConfig()).interval(method, j, level)


__all__ = [
    "BootConfig",
    "BootstrapHistograms",
    "BootstrapRun",
    "DegenerateBias",
    "IntervalEstimate",
    "Method",
    "STANDARD_METHODS",
    "bca_constants",
    "bca_interval",
    "bca_levels",
    "boot_t_interval",
    "calibrate_lambda",
    "compute_histograms",
    "compute_interval",
    "ecdf_position",
    "parse_methods",
    "perc_cal_interval",
    "percentile_endpoints",
    "percentile_interval",
    "sandwich_interval",
    "studentized_endpoints",
    "studentized_interval",
    "z_interval",
]
