"""Estimation engine (fixed-effects OLS, 2SLS, robust/clustered errors) and
the dataset builders feeding it."""

from .estimation import (
    EstimationResult,
    RankDeficientError,
    RegressionSpec,
    binned_probability,
    fit_2sls,
    fit_ols_fe,
)
from .datasets import (
    build_entry_rows,
    build_salary_rows,
    build_voting_rows,
    minute_task_counts,
    placebo_split,
)

__all__ = [
    "EstimationResult",
    "RankDeficientError",
    "RegressionSpec",
    "binned_probability",
    "fit_2sls",
    "fit_ols_fe",
    "build_entry_rows",
    "build_salary_rows",
    "build_voting_rows",
    "minute_task_counts",
    "placebo_split",
]
