"""Match job-ad requirements to tasks by embedding cosine similarity and run
the masked-requirement prediction check.

Each task may carry one or more reference vectors (its label embedding, its
main tag's embedding, the mean of its tags' embeddings, or all of them); a
requirement scores against a task as the best cosine over the task's
vectors, and matches the argmax task when that cosine clears the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import JobAd, TaskLabel
from .relatedness import RelatednessMatrix


@dataclass(frozen=True)
class JobTaskVector:
    job_id: int
    task_ids: tuple[int, ...]
    required: np.ndarray  # binary (n_tasks,)
    cosines: dict[int, float]  # task_id -> best cosine among matched requirements

    def n_required(self) -> int:
        return int(self.required.sum())


@dataclass(frozen=True)
class MaskedBin:
    bin_id: int
    density_low: float
    density_high: float
    n: int
    successes: int
    p_hat: float
    ci_low: float
    ci_high: float


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("zero-norm embedding")
    return float(a @ b / (na * nb))


def match_requirement(
    req_embedding: np.ndarray,
    task_vectors: Mapping[int, np.ndarray],
    threshold: float = 0.3,
) -> tuple[int, float] | None:
    """Best-cosine task if it clears the threshold, else None.

    task_vectors maps task_id -> 1-D vector or 2-D stack of vectors; ties go
    to the lower task id.
    """
    req = np.asarray(req_embedding, dtype=np.float64)
    best: tuple[float, int] | None = None
    for task_id in sorted(task_vectors):
        vecs = np.atleast_2d(np.asarray(task_vectors[task_id], dtype=np.float64))
        score = max(cosine(req, v) for v in vecs)
        if best is None or score > best[0]:
            best = (score, task_id)
    if best is None or best[0] < threshold:
        return None
    return best[1], best[0]


def job_task_vector(
    job: JobAd,
    task_vectors: Mapping[int, np.ndarray],
    threshold: float = 0.3,
    task_ids: Sequence[int] | None = None,
) -> JobTaskVector:
    """Union of matched tasks over the job's requirements."""
    ids = tuple(sorted(task_ids if task_ids is not None else task_vectors))
    index = {t: i for i, t in enumerate(ids)}
    required = np.zeros(len(ids), dtype=np.int8)
    cosines: dict[int, float] = {}
    for req in job.requirements:
        hit = match_requirement(np.asarray(req.embedding), task_vectors, threshold)
        if hit is None:
            continue
        task_id, score = hit
        required[index[task_id]] = 1
        cosines[task_id] = max(score, cosines.get(task_id, -1.0))
    return JobTaskVector(job.job_id, ids, required, cosines)


def masked_prediction_table(
    jobs: Sequence[JobTaskVector],
    r: RelatednessMatrix,
    mask_frac: float = 0.4,
    bins: int = 10,
    seed: int = 0,
    min_tasks: int = 3,
) -> list[MaskedBin]:
    """Mask a fraction of all (job, task) cells, score each masked cell by
    the density of the job's unmasked tasks around it, and report the
    required-probability per density decile with normal-approximation CIs.

    Only jobs listing at least min_tasks tasks enter; cells whose focal task
    has no relatedness neighborhood are dropped.
    """
    eligible = [j for j in jobs if j.n_required() >= min_tasks]
    if not eligible:
        raise ValueError(f"no jobs with at least {min_tasks} required tasks")
    if tuple(eligible[0].task_ids) != tuple(r.task_ids):
        raise ValueError("job vectors and relatedness matrix index different tasks")

    n_tasks = len(r.task_ids)
    n_jobs = len(eligible)
    stacked = np.stack([j.required for j in eligible]).astype(np.float64)  # jobs x tasks

    total_cells = n_jobs * n_tasks
    n_masked = int(round(mask_frac * total_cells))
    if total_cells < bins:
        raise ValueError("fewer cells than bins")
    rng = np.random.default_rng(seed)
    masked_flat = rng.choice(total_cells, size=n_masked, replace=False)
    masked_flat.sort()
    job_idx, task_idx = np.divmod(masked_flat, n_tasks)

    mask = np.zeros((n_jobs, n_tasks), dtype=bool)
    mask[job_idx, task_idx] = True
    unmasked = np.where(mask, 0.0, stacked)

    row_sums = r.values.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = r.values / row_sums[:, None]  # row-normalized relatedness

    densities = np.empty(n_masked)
    outcomes = np.empty(n_masked, dtype=np.int64)
    keep = np.ones(n_masked, dtype=bool)
    for idx in range(n_masked):
        jj, tt = job_idx[idx], task_idx[idx]
        if row_sums[tt] <= 0:
            keep[idx] = False
            continue
        densities[idx] = weights[tt] @ unmasked[jj]
        outcomes[idx] = int(stacked[jj, tt])
    densities = densities[keep]
    outcomes = outcomes[keep]
    if len(densities) < bins:
        raise ValueError("fewer scoreable masked cells than bins")

    return _binned_frequencies(densities, outcomes, bins)


def _binned_frequencies(scores: np.ndarray, outcomes: np.ndarray, bins: int) -> list[MaskedBin]:
    order = np.argsort(scores, kind="stable")
    chunks = np.array_split(order, bins)
    table = []
    for b, chunk in enumerate(chunks):
        n = len(chunk)
        successes = int(outcomes[chunk].sum())
        p_hat = successes / n
        sem = np.sqrt(p_hat * (1 - p_hat)) / np.sqrt(n)
        table.append(
            MaskedBin(
                bin_id=b,
                density_low=float(scores[chunk].min()),
                density_high=float(scores[chunk].max()),
                n=n,
                successes=successes,
                p_hat=p_hat,
                ci_low=p_hat - 1.96 * sem,
                ci_high=p_hat + 1.96 * sem,
            )
        )
    return table


def label_vectors(labels: Mapping[int, TaskLabel]) -> dict[int, np.ndarray]:
    """Label-embedding bundle: one vector per task."""
    return {tid: np.asarray(lab.embedding, dtype=np.float64) for tid, lab in labels.items()}
