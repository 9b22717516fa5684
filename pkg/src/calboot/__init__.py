"""Confidence intervals for least-squares slopes under misspecification.

The calibrated percentile double bootstrap, ten comparison intervals, a Monte
Carlo coverage harness and a command-line front end.
"""

from .errors import (
    CalbootError,
    EmptySample,
    LeverageOne,
    NonFiniteEstimand,
    ParseError,
    SingularDesign,
    TooManyDegenerateResamples,
)
from .intervals import (
    BootConfig,
    BootstrapRun,
    IntervalEstimate,
    Method,
    compute_interval,
    perc_cal_interval,
)
from .regress import Dataset, SeVariant, fit_ols, se_for

__version__ = "0.1.0"

__all__ = [
    "BootConfig",
    "BootstrapRun",
    "CalbootError",
    "Dataset",
    "EmptySample",
    "IntervalEstimate",
    "LeverageOne",
    "Method",
    "NonFiniteEstimand",
    "ParseError",
    "SeVariant",
    "SingularDesign",
    "TooManyDegenerateResamples",
    "compute_interval",
    "fit_ols",
    "perc_cal_interval",
    "se_for",
]
