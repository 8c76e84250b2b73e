"""Least-squares estimation with absorbed fixed effects, HC1/cluster-robust
covariance, and two-stage least squares.

Fixed effects are absorbed by within-group demeaning (one factor) or
alternating projections (two factors, converged to 1e-10).  Degrees of
freedom count the absorbed group parameters, so the covariance matches a
dummy-variable regression run on the same data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

_DEMEAN_TOL = 1e-10
_DEMEAN_CAP = 10_000


class RankDeficientError(ValueError):
    """Design matrix is rank deficient; names the collinear columns."""


@dataclass(frozen=True)
class RegressionSpec:
    outcome: str
    regressors: tuple[str, ...]
    endogenous: tuple[str, ...] = ()
    instruments: tuple[str, ...] = ()
    fixed_effects: tuple[str, ...] = ()
    cluster: str | None = None

    def __post_init__(self):
        if len(self.fixed_effects) > 2:
            raise ValueError("at most two fixed-effect factors")
        overlap = (set(self.endogenous) | set(self.instruments)) & set(self.regressors)
        if overlap:
            raise ValueError(f"columns {sorted(overlap)} appear as both exogenous and IV-side")
        if self.endogenous and not self.instruments:
            raise ValueError("endogenous regressors need instruments")
        if len(self.instruments) < len(self.endogenous):
            raise ValueError("need at least as many instruments as endogenous regressors")


@dataclass
class EstimationResult:
    names: tuple[str, ...]
    params: np.ndarray
    cov: np.ndarray
    n_obs: int
    r2: float
    within_r2: float | None
    first_stage_f: float | None = None
    warnings: tuple[str, ...] = ()
    residuals: np.ndarray = field(default=None, repr=False)

    def coef(self, name: str) -> float:
        return float(self.params[self.names.index(name)])

    def se(self, name: str) -> float:
        i = self.names.index(name)
        return float(np.sqrt(self.cov[i, i]))

    def conf_int(self, name: str, z: float = 1.96) -> tuple[float, float]:
        c, s = self.coef(name), self.se(name)
        return c - z * s, c + z * s

    def stars(self, name: str) -> str:
        from scipy.stats import norm

        t = abs(self.coef(name)) / self.se(name) if self.se(name) > 0 else np.inf
        p = 2 * (1 - norm.cdf(t))
        return "***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.1 else ""

    def to_table(self) -> dict:
        return {
            "coefficients": {
                name: {
                    "coef": float(self.params[i]),
                    "se": float(np.sqrt(self.cov[i, i])),
                    "stars": self.stars(name),
                }
                for i, name in enumerate(self.names)
            },
            "n_obs": self.n_obs,
            "r2": self.r2,
            "within_r2": self.within_r2,
            "first_stage_f": self.first_stage_f,
            "warnings": list(self.warnings),
        }


def _columns(rows: pd.DataFrame, names: Sequence[str]) -> np.ndarray:
    missing = [n for n in names if n not in rows.columns]
    if missing:
        raise KeyError(f"missing columns {missing}")
    arr = rows.loc[:, list(names)].to_numpy(dtype=np.float64)
    if np.isnan(arr).any():
        bad = [n for n in names if rows[n].isna().any()]
        raise ValueError(f"NaN values in columns {bad}")
    return arr


def _group_codes(rows: pd.DataFrame, factor: str) -> tuple[np.ndarray, int]:
    codes, uniques = pd.factorize(rows[factor], sort=True)
    if (codes < 0).any():
        raise ValueError(f"missing values in fixed-effect factor {factor!r}")
    return codes.astype(np.int64), len(uniques)


def _demean_one(values: np.ndarray, codes: np.ndarray, n_groups: int) -> np.ndarray:
    counts = np.bincount(codes, minlength=n_groups).astype(np.float64)
    out = values.copy()
    for j in range(out.shape[1]):
        sums = np.bincount(codes, weights=out[:, j], minlength=n_groups)
        out[:, j] -= (sums / counts)[codes]
    return out


def _absorb(
    values: np.ndarray, factors: list[tuple[np.ndarray, int]]
) -> np.ndarray:
    if not factors:
        return values
    if len(factors) == 1:
        codes, n_groups = factors[0]
        return _demean_one(values, codes, n_groups)
    out = values.copy()
    for _ in range(_DEMEAN_CAP):
        previous = out.copy()
        for codes, n_groups in factors:
            out = _demean_one(out, codes, n_groups)
        if np.abs(out - previous).max() < _DEMEAN_TOL:
            return out
    return out


def _check_rank(x: np.ndarray, names: Sequence[str]) -> None:
    from scipy.linalg import qr

    if x.shape[0] < x.shape[1]:
        raise RankDeficientError("more parameters than observations")
    _, r_mat, piv = qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diagonal(r_mat))
    tol = max(x.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    n_ok = int((diag > tol).sum())
    if n_ok < x.shape[1]:
        collinear = [names[piv[i]] for i in range(n_ok, x.shape[1])]
        raise RankDeficientError(f"collinear columns: {collinear}")


def _absorbed_dof(factors: list[tuple[np.ndarray, int]]) -> int:
    if not factors:
        return 0
    if len(factors) == 1:
        return factors[0][1]
    return factors[0][1] + factors[1][1] - 1


def _sandwich(
    xt: np.ndarray,
    resid: np.ndarray,
    bread: np.ndarray,
    k_total: int,
    cluster_codes: np.ndarray | None,
) -> np.ndarray:
    n = xt.shape[0]
    if cluster_codes is None:
        c = n / (n - k_total)
        meat = (xt * (resid**2)[:, None]).T @ xt
        return c * bread @ meat @ bread
    n_clusters = int(cluster_codes.max()) + 1
    k = xt.shape[1]
    meat = np.zeros((k, k))
    scores = xt * resid[:, None]
    sums = np.zeros((n_clusters, k))
    np.add.at(sums, cluster_codes, scores)
    meat = sums.T @ sums
    c = (n_clusters / (n_clusters - 1)) * ((n - 1) / (n - k_total))
    return c * bread @ meat @ bread


def fit_ols_fe(rows: pd.DataFrame, spec: RegressionSpec) -> EstimationResult:
    """Within-transformed least squares with robust or clustered errors."""
    if spec.endogenous:
        raise ValueError("spec has endogenous regressors; use fit_2sls")
    y = _columns(rows, [spec.outcome])[:, 0]
    names = list(spec.regressors)
    x = _columns(rows, names)
    if not spec.fixed_effects:
        x = np.column_stack([np.ones(len(y)), x])
        names = ["const"] + names

    factors = [_group_codes(rows, f) for f in spec.fixed_effects]
    stacked = _absorb(np.column_stack([y[:, None], x]), factors)
    y_t, x_t = stacked[:, 0], stacked[:, 1:]

    _check_rank(x_t, names)
    beta, *_ = np.linalg.lstsq(x_t, y_t, rcond=None)
    resid = y_t - x_t @ beta

    n = len(y)
    k_total = x_t.shape[1] + _absorbed_dof(factors)
    bread = np.linalg.inv(x_t.T @ x_t)
    cluster_codes = None
    if spec.cluster is not None:
        cluster_codes, _ = _group_codes(rows, spec.cluster)
    cov = _sandwich(x_t, resid, bread, k_total, cluster_codes)

    ssr = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ssr / tss if tss > 0 else np.nan
    within = None
    if factors:
        yc = y_t - y_t.mean()
        tss_w = float(yc @ yc)
        within = 1.0 - ssr / tss_w if tss_w > 0 else np.nan
    return EstimationResult(
        names=tuple(names),
        params=beta,
        cov=cov,
        n_obs=n,
        r2=r2,
        within_r2=within,
        residuals=resid,
    )


def fit_2sls(rows: pd.DataFrame, spec: RegressionSpec) -> EstimationResult:
    """Two-stage least squares with fixed effects absorbed before both stages."""
    if not spec.endogenous:
        raise ValueError("spec has no endogenous regressors; use fit_ols_fe")
    y = _columns(rows, [spec.outcome])[:, 0]
    exog_names = list(spec.regressors)
    x_exog = _columns(rows, exog_names)
    x_endog = _columns(rows, list(spec.endogenous))
    z_excl = _columns(rows, list(spec.instruments))
    if not spec.fixed_effects:
        x_exog = np.column_stack([np.ones(len(y)), x_exog])
        exog_names = ["const"] + exog_names

    factors = [_group_codes(rows, f) for f in spec.fixed_effects]
    blocks = np.column_stack([y[:, None], x_exog, x_endog, z_excl])
    absorbed = _absorb(blocks, factors)
    n_ex, n_en = x_exog.shape[1], x_endog.shape[1]
    y_t = absorbed[:, 0]
    exog_t = absorbed[:, 1 : 1 + n_ex]
    endog_t = absorbed[:, 1 + n_ex : 1 + n_ex + n_en]
    z_t = absorbed[:, 1 + n_ex + n_en :]

    z_full = np.column_stack([exog_t, z_t])
    _check_rank(z_full, exog_names + list(spec.instruments))

    # first stage: fitted endogenous columns and their excluded-instrument F
    gram_z = z_full.T @ z_full
    fitted = np.empty_like(endog_t)
    f_stats = []
    k_z_total = z_full.shape[1] + _absorbed_dof(factors)
    for j in range(n_en):
        gamma = np.linalg.solve(gram_z, z_full.T @ endog_t[:, j])
        fitted[:, j] = z_full @ gamma
        ssr_u = float(((endog_t[:, j] - fitted[:, j]) ** 2).sum())
        if exog_t.shape[1]:
            gamma_r, *_ = np.linalg.lstsq(exog_t, endog_t[:, j], rcond=None)
            ssr_r = float(((endog_t[:, j] - exog_t @ gamma_r) ** 2).sum())
        else:
            ssr_r = float((endog_t[:, j] ** 2).sum())
        q = z_t.shape[1]
        dof = len(y) - k_z_total
        f_stats.append(((ssr_r - ssr_u) / q) / (ssr_u / dof) if ssr_u > 0 and dof > 0 else np.inf)

    names = exog_names + list(spec.endogenous)
    x_hat = np.column_stack([exog_t, fitted])
    x_real = np.column_stack([exog_t, endog_t])
    _check_rank(x_hat, names)

    gram = x_hat.T @ x_hat
    beta = np.linalg.solve(gram, x_hat.T @ y_t)
    resid = y_t - x_real @ beta

    n = len(y)
    k_total = x_hat.shape[1] + _absorbed_dof(factors)
    bread = np.linalg.inv(gram)
    cluster_codes = None
    if spec.cluster is not None:
        cluster_codes, _ = _group_codes(rows, spec.cluster)
    cov = _sandwich(x_hat, resid, bread, k_total, cluster_codes)

    ssr = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ssr / tss if tss > 0 else np.nan
    within = None
    if factors:
        yc = y_t - y_t.mean()
        tss_w = float(yc @ yc)
        within = 1.0 - ssr / tss_w if tss_w > 0 else np.nan

    min_f = float(min(f_stats)) if f_stats else None
    warnings = ()
    if min_f is not None and min_f < 1.0:
        warnings = (f"weak identification: first-stage F = {min_f:.4f} < 1",)
    return EstimationResult(
        names=tuple(names),
        params=beta,
        cov=cov,
        n_obs=n,
        r2=r2,
        within_r2=within,
        first_stage_f=min_f,
        warnings=warnings,
        residuals=resid,
    )


def binned_probability(
    rows: pd.DataFrame,
    score: str,
    outcome: str,
    bins: int = 10,
) -> pd.DataFrame:
    """Success frequency per equal-size score decile with normal-approx CIs."""
    if len(rows) < bins:
        raise ValueError("fewer rows than bins")
    scores = rows[score].to_numpy(dtype=np.float64)
    outcomes = rows[outcome].to_numpy(dtype=np.float64)
    if np.isnan(scores).any() or np.isnan(outcomes).any():
        raise ValueError("NaN in score or outcome column")
    if scores.min() == scores.max():
        raise ValueError("constant score column: bins undefined")
    order = np.argsort(scores, kind="stable")
    chunks = np.array_split(order, bins)
    records = []
    for b, chunk in enumerate(chunks):
        n_b = len(chunk)
        d_b = float(outcomes[chunk].sum())
        pi = d_b / n_b
        sem = np.sqrt(pi * (1 - pi)) / np.sqrt(n_b)
        records.append(
            {
                "bin": b,
                "lo": float(scores[chunk].min()),
                "hi": float(scores[chunk].max()),
                "n": n_b,
                "successes": int(d_b),
                "p_hat": pi,
                "ci_lo": pi - 1.96 * sem,
                "ci_hi": pi + 1.96 * sem,
            }
        )
    return pd.DataFrame.from_records(records)
