"""Synthetic stand-in for a sentencing-style regression population.

Fifty thousand fictitious cases with a log jail-length response and eight
covariates of mixed type.  It is a made-up population for exercising the
subsampling study, not real data.  Its one deliberate feature is a covariate
(``log_prior_jail``, log of one plus prior jail days) whose distribution is split between a spike at zero and a
long right tail, and whose effect on the response saturates.  The best linear
fit to that curved, two-cluster relationship is well defined, but its residual
variance grows with the covariate, so classical standard errors understate the
sampling spread of that slope.
"""

from __future__ import annotations

import numpy as np

from .regress import Dataset

STANDIN_SEED = 20_240_601
STANDIN_SIZE = 50_000
RESPONSE = "log_jail_days"
COVARIATES = (
    "seriousness",
    "age",
    "race_nonwhite",
    "pct_nonwhite",
    "in_state",
    "juvenile",
    "log_prior_jail",
    "age_firstcrime",
)
NONLINEAR = "log_prior_jail"


def standin_table(n: int = STANDIN_SIZE, seed: int = STANDIN_SEED) -> tuple[np.ndarray, np.ndarray]:
    """Covariate matrix (``n x 8``, columns :data:`COVARIATES`) and response."""
    rng = np.random.Generator(np.random.PCG64(seed))
    seriousness = rng.choice(np.arange(1, 15), size=n,
                             p=np.linspace(14, 1, 14) / np.linspace(14, 1, 14).sum())
    age = np.minimum(18.0 + rng.gamma(2.0, 7.0, n), 80.0).round()
    race = (rng.random(n) < 0.42).astype(float)
    pct = np.clip(100 * rng.beta(2.0 + 2.0 * race, 4.0 - 1.5 * race), 0, 100).round(1)
    in_state = (rng.random(n) < 0.85).astype(float)
    juvenile = (rng.random(n) < np.where(age < 25, 0.35, 0.12)).astype(float)
    age_first = np.minimum(age, np.maximum(10.0, age - rng.gamma(1.5, 6.0, n))).round()

    # spike at zero plus a long right tail, heavier for people with records
    has_prior = rng.random(n) < 0.45 + 0.2 * juvenile
    tail = np.exp(rng.normal(3.5 + 0.08 * (age - age_first) / 5, 1.3, n))
    prior = np.where(has_prior, np.minimum(tail, 3650.0), 0.0).round()

    log_prior = np.log1p(prior)
    # saturating effect: steep for short records, flat past a few months
    effect = 2.2 * (1.0 - np.exp(-prior / 45.0))
    mean = (0.6 + 0.22 * seriousness + 0.012 * (age - 30) + 0.15 * race + 0.004 * pct
            - 0.25 * in_state + 0.35 * juvenile + effect - 0.01 * (age_first - 20))
    noise = rng.normal(0.0, 0.5 + 0.12 * log_prior, n)
    y = np.maximum(mean + noise, 0.0)
    x = np.column_stack([seriousness, age, race, pct, in_state, juvenile, log_prior, age_first])
    return x.astype(float), y


def standin_population(n: int = STANDIN_SIZE, seed: int = STANDIN_SEED) -> Dataset:
    x, y = standin_table(n, seed)
    return Dataset.from_covariates(x, y, COVARIATES)


def nonlinear_index() -> int:
    """Coefficient index (intercept = 0) of the curved covariate."""
    return 1 + COVARIATES.index(NONLINEAR)
