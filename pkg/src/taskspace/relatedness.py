"""Task relatedness from co-occurrence within users, measured as clipped
pointwise mutual information, plus the density score built on top of it.

Counting convention: probabilities are cell frequencies of the full
symmetric count matrix (diagonal included), marginals are row sums of those
frequencies.  Negative ln-ratios are clipped to zero after interval
computation, so intervals describe the unclipped quantity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import sparse

from .activity import UserTaskMatrix


@dataclass(frozen=True)
class CooccurrenceCounts:
    task_ids: tuple[int, ...]
    counts: np.ndarray  # symmetric (n, n) int64; diagonal = users active in the task
    n_users: int

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class RelatednessMatrix:
    task_ids: tuple[int, ...]
    values: np.ndarray  # clipped PMI, symmetric nonnegative
    ci_low: np.ndarray | None = None  # on unclipped PMI
    ci_high: np.ndarray | None = None
    sample_label: str = ""
    window: str = ""

    def __post_init__(self):
        v = self.values
        if (v < 0).any():
            raise ValueError("relatedness must be nonnegative")
        if not np.array_equal(v, v.T):
            raise ValueError("relatedness must be symmetric")

    @property
    def n_tasks(self) -> int:
        return len(self.task_ids)

    def row_index(self, task_id: int) -> int:
        return self.task_ids.index(task_id)


def cooccurrence_counts(matrix: UserTaskMatrix) -> CooccurrenceCounts:
    """C = B B' with B = (counts > 0); exact integers."""
    if matrix.counts.shape[1] == 0:
        raise ValueError("experience matrix has no users")
    b = (matrix.counts > 0).astype(np.int64)
    c = np.asarray((b @ b.T).todense()) if sparse.issparse(b) else b @ b.T
    return CooccurrenceCounts(matrix.task_ids, np.asarray(c), matrix.counts.shape[1])


def _pmi_from_probabilities(p: np.ndarray) -> np.ndarray:
    """Unclipped ln(p_ij / (p_i p_j)); cells with p_ij = 0 are set to 0."""
    marg = p.sum(axis=1)
    denom = np.outer(marg, marg)
    mask = p > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.divide(p, denom, out=np.ones_like(p), where=mask)
    return np.log(ratio, out=np.zeros_like(p), where=mask)


def pmi_matrix(
    c: CooccurrenceCounts, sample_label: str = "", window: str = ""
) -> RelatednessMatrix:
    """Clipped PMI of the co-occurrence counts."""
    counts = c.counts
    total = counts.sum()
    if total <= 0:
        raise ValueError("co-occurrence counts sum to zero")
    p = counts / total
    pmi = _pmi_from_probabilities(p)
    clipped = np.maximum(pmi, 0.0)
    clipped = np.ascontiguousarray(np.maximum(clipped, clipped.T))  # guard symmetry exactly
    return RelatednessMatrix(c.task_ids, clipped, sample_label=sample_label, window=window)


def pmi_credible_intervals(
    c: CooccurrenceCounts,
    draws: int = 1000,
    prior_alpha: float = 1.0,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """95% credible intervals on unclipped PMI per cell.

    Posterior over cell probabilities is Dirichlet(prior_alpha + counts) over
    all ordered cells; each draw is symmetrized before the PMI evaluation so
    intervals come out symmetric.  Deterministic for a given seed.
    """
    if draws < 100:
        raise ValueError("draws must be >= 100")
    counts = c.counts
    n = counts.shape[0]
    rng = np.random.default_rng(seed)
    alpha = (prior_alpha + counts).ravel().astype(np.float64)
    # float32 keeps the draw buffer small for large task counts
    samples = np.empty((draws, n, n), dtype=np.float32)
    for d in range(draws):
        q = rng.dirichlet(alpha).reshape(n, n)
        q = (q + q.T) / 2.0
        samples[d] = _pmi_from_probabilities(q)
    lo = np.percentile(samples, 2.5, axis=0).astype(np.float64)
    hi = np.percentile(samples, 97.5, axis=0).astype(np.float64)
    return lo, hi


def with_intervals(
    r: RelatednessMatrix, c: CooccurrenceCounts, draws: int = 1000,
    prior_alpha: float = 1.0, seed: int = 0,
) -> RelatednessMatrix:
    lo, hi = pmi_credible_intervals(c, draws=draws, prior_alpha=prior_alpha, seed=seed)
    return RelatednessMatrix(
        r.task_ids, r.values, ci_low=lo, ci_high=hi,
        sample_label=r.sample_label, window=r.window,
    )


def density(r: RelatednessMatrix, x: np.ndarray, task_id: int) -> float:
    """Relatedness-weighted average of x around the task.

    Weights are the task's relatedness row normalized by its full row sum;
    a task with an all-zero row has no defined neighborhood.
    """
    i = r.row_index(task_id)
    row = r.values[i]
    row_sum = row.sum()
    if row_sum <= 0:
        raise ValueError(f"isolated task {task_id}: zero relatedness row")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != row.shape:
        raise ValueError("vector length does not match task count")
    return float((row / row_sum) @ x)


def density_all(r: RelatednessMatrix, x: np.ndarray) -> np.ndarray:
    """density() for every task at once; isolated tasks get NaN."""
    row_sums = r.values.sum(axis=1)
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = r.values / row_sums[:, None]
    out = weights @ x
    out[row_sums <= 0] = np.nan
    return out
