"""Least-squares fitting and classical / heteroskedasticity-consistent SEs."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import LeverageOne, SingularDesign

PIVOT_RTOL = 1e-12
LEVERAGE_ONE_TOL = 1e-12
HC5_CONSTANT = 0.7


@dataclass(frozen=True)
class Dataset:
    """``n`` observations: a design with a leading intercept column and a response.

    The ``n >= p + 2`` requirement is checked by :func:`fit_ols`, not here, so that
    tiny resamples can still be represented.
    """

    x_rows: np.ndarray
    y: np.ndarray
    columns: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        x = np.ascontiguousarray(self.x_rows, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ValueError(f"shape mismatch: x {x.shape}, y {y.shape}")
        if x.shape[0] == 0 or x.shape[1] == 0:
            raise ValueError("empty dataset")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        if not np.all(x[:, 0] == 1.0):
            raise ValueError("first design column must be identically 1")
        if self.columns is not None and len(self.columns) != x.shape[1]:
            raise ValueError("columns must name every design column")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x_rows", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_covariates(cls, covariates, y, names: tuple[str, ...] | None = None) -> Dataset:
        """Prepend the intercept column to an ``n x p`` (or length-n) covariate array."""
        z = np.asarray(covariates, dtype=np.float64)
        if z.ndim == 1:
            z = z[:, None]
        x = np.column_stack([np.ones(z.shape[0]), z])
        columns = None if names is None else ("(intercept)", *names)
        return cls(x, np.asarray(y, dtype=np.float64), columns)

    @property
    def n(self) -> int:
        return self.x_rows.shape[0]

    @property
    def p(self) -> int:
        """Number of covariates, excluding the intercept."""
        return self.x_rows.shape[1] - 1

    @property
    def covariates(self) -> np.ndarray:
        return self.x_rows[:, 1:]

    def take(self, rows) -> Dataset:
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(self.x_rows[rows], self.y[rows], self.columns)

    def coef_names(self) -> tuple[str, ...]:
        if self.columns is not None:
            return self.columns
        return ("(intercept)",) + tuple(f"x{i}" for i in range(1, self.p + 1))


@dataclass(frozen=True)
class LsFit:
    beta_hat: np.ndarray
    residuals: np.ndarray
    leverages: np.ndarray
    xtx_inv: np.ndarray
    sigma2_hat: float


class SeVariant(enum.Enum):
    CLASSICAL = "CLASSICAL"
    HC0 = "HC0"
    HC1 = "HC1"
    HC2 = "HC2"
    HC3 = "HC3"
    HC4 = "HC4"
    HC5 = "HC5"


def _centered_beta(data: Dataset) -> np.ndarray | None:
    from . import _kernels as K

    zc, yc, f, gmean = K.prepare(np.ascontiguousarray(data.covariates), data.y)
    beta, _, ok = K.fit_subset(zc, yc, f, gmean, np.arange(data.n), -1)
    return beta if ok else None


def fit_ols(data: Dataset) -> LsFit:
    """Least squares through a thin QR factorization of the design.

    Coefficients come from the centered normal equations shared with the
    resampling kernels, so every method reports the same point estimate and an
    exact linear relation is fitted exactly; the QR supplies the pivot test,
    the inverse Gram matrix and the leverages.  Raises :class:`SingularDesign` when the smallest ``|R_ii|`` is not above
    ``1e-12`` times the largest.
    """
    x, y = data.x_rows, data.y
    n, k = x.shape
    if n < k + 1:
        raise ValueError(f"need n >= p + 2 observations, got n={n} with {k} columns")
    q, r = np.linalg.qr(x)
    piv = np.abs(np.diag(r))
    if not piv.min() > PIVOT_RTOL * piv.max():
        raise SingularDesign(f"pivot ratio {piv.min() / max(piv.max(), 1e-300):.3g}")
    beta = _centered_beta(data)
    if beta is None:
        beta = solve_triangular(r, q.T @ y)
    r_inv = solve_triangular(r, np.eye(k))
    xtx_inv = r_inv @ r_inv.T
    xtx_inv = 0.5 * (xtx_inv + xtx_inv.T)
    resid = y - x @ beta
    lev = np.einsum("ij,ij->i", q, q)
    sigma2 = float(resid @ resid) / (n - k)
    return LsFit(beta, resid, lev, xtx_inv, sigma2)


def leverages(fit: LsFit, data: Dataset) -> np.ndarray:
    """Diagonal of the hat matrix, ``x_i' (X'X)^-1 x_i``."""
    x = data.x_rows
    return np.einsum("ij,jk,ik->i", x, fit.xtx_inv, x)


def hc_weights(fit: LsFit, data: Dataset, variant: SeVariant) -> np.ndarray:
    """Per-row meat weights ``omega_i = e_i^2 * c_i`` for an HC variant."""
    if variant is SeVariant.CLASSICAL:
        raise ValueError("CLASSICAL has no sandwich weights")
    n, k = data.x_rows.shape
    e2 = fit.residuals**2
    h = fit.leverages
    if variant is SeVariant.HC0:
        return e2
    if variant is SeVariant.HC1:
        return e2 * (n / (n - k))
    if np.any(h >= 1.0 - LEVERAGE_ONE_TOL):
        raise LeverageOne(f"max leverage {h.max():.17g}")
    one_minus_h = 1.0 - h
    if variant is SeVariant.HC2:
        return e2 / one_minus_h
    if variant is SeVariant.HC3:
        return e2 / one_minus_h**2
    ratio = n * h / k
    if variant is SeVariant.HC4:
        delta = np.minimum(4.0, ratio)
        return e2 / one_minus_h**delta
    gamma = np.minimum(ratio, max(4.0, HC5_CONSTANT * n * h.max() / k))
    return e2 / one_minus_h**gamma


def covariance(fit: LsFit, data: Dataset, variant: SeVariant) -> np.ndarray:
    """Full coefficient covariance estimate for ``variant``."""
    if variant is SeVariant.CLASSICAL:
        return fit.sigma2_hat * fit.xtx_inv
    a = fit.xtx_inv @ data.x_rows.T
    return (a * hc_weights(fit, data, variant)) @ a.T


def se_for(fit: LsFit, data: Dataset, variant: SeVariant, coef_index: int) -> float:
    k = data.x_rows.shape[1]
    if not 0 <= coef_index < k:
        raise IndexError(f"coef_index {coef_index} outside [0, {k - 1}]")
    if variant is SeVariant.CLASSICAL:
        return float(np.sqrt(fit.sigma2_hat * fit.xtx_inv[coef_index, coef_index]))
    row = fit.xtx_inv[coef_index] @ data.x_rows.T
    var = float(np.sum(row * row * hc_weights(fit, data, variant)))
    return float(np.sqrt(max(var, 0.0)))
