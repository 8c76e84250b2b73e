"""User task-experience vectors on rolling two-year windows.

The window labeled t covers the two calendar years before t: an answer
posted in 2016 or 2017 counts toward window 2018.  An answer increments
every task whose tags appear on its question, so one answer can add
experience in several tasks at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

from .corpus import Corpus, year_bounds, year_of
from .taxonomy import TaskTaxonomy


@dataclass(frozen=True)
class ExperienceVector:
    user_id: int
    window: int  # calendar-year label t; counts answers from t-2 and t-1
    counts: np.ndarray  # (n_tasks,) int64, aligned with task id order


@dataclass
class UserTaskMatrix:
    """Tasks x users count matrix for one window."""

    window: int
    task_ids: tuple[int, ...]
    user_ids: tuple[int, ...]
    counts: sparse.csr_matrix  # (n_tasks, n_users)
    sample_label: str = ""  # provenance: which user sample built this

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    def column(self, user_id: int) -> np.ndarray:
        j = self.user_ids.index(user_id)
        return np.asarray(self.counts[:, j].todense()).ravel()

    def dense(self) -> np.ndarray:
        return np.asarray(self.counts.todense())


def window_bounds(window: int) -> tuple[int, int]:
    """[start, end) epoch seconds of the two calendar years preceding window."""
    start, _ = year_bounds(window - 2)
    _, end = year_bounds(window - 1)
    return start, end


def _count_in_range(
    corpus: Corpus,
    taxonomy: TaskTaxonomy,
    users: Iterable[int],
    start: int,
    end: int,
) -> dict[int, dict[int, int]]:
    """user -> {task -> answer count} within [start, end)."""
    user_set = set(users)
    out: dict[int, dict[int, int]] = {u: {} for u in user_set}
    for uid in user_set:
        for aid in corpus.user_answers.get(uid, ()):
            ans = corpus.answers[aid]
            if not start <= ans.created_at < end:
                continue
            tasks = {
                taxonomy.tag_to_task[t]
                for t in corpus.questions[ans.question_id].tag_ids
                if t in taxonomy.tag_to_task
            }
            for task in tasks:
                out[uid][task] = out[uid].get(task, 0) + 1
    return out


def experience_vector(
    corpus: Corpus, taxonomy: TaskTaxonomy, user_id: int, window: int
) -> ExperienceVector:
    """Answer counts per task in the two years before the window year.

    Unknown users get a zero vector rather than an error.
    """
    task_ids = taxonomy.task_ids()
    task_index = {t: i for i, t in enumerate(task_ids)}
    counts = np.zeros(len(task_ids), dtype=np.int64)
    start, end = window_bounds(window)
    per_user = _count_in_range(corpus, taxonomy, [user_id], start, end)
    for task, n in per_user.get(user_id, {}).items():
        counts[task_index[task]] = n
    return ExperienceVector(user_id, window, counts)


def experience_matrix(
    corpus: Corpus,
    taxonomy: TaskTaxonomy,
    users: Iterable[int],
    window: int,
    sample_label: str = "",
) -> UserTaskMatrix:
    """Stack experience vectors as columns, users ordered by id."""
    user_ids = tuple(sorted(set(users)))
    if not user_ids:
        raise ValueError("users must be nonempty")
    task_ids = tuple(taxonomy.task_ids())
    task_index = {t: i for i, t in enumerate(task_ids)}
    start, end = window_bounds(window)
    per_user = _count_in_range(corpus, taxonomy, user_ids, start, end)
    rows, cols, vals = [], [], []
    for j, uid in enumerate(user_ids):
        for task, n in sorted(per_user[uid].items()):
            rows.append(task_index[task])
            cols.append(j)
            vals.append(n)
    counts = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(task_ids), len(user_ids)), dtype=np.int64
    )
    return UserTaskMatrix(window, task_ids, user_ids, counts, sample_label)


def activity_matrix(
    corpus: Corpus,
    taxonomy: TaskTaxonomy,
    users: Iterable[int],
    year: int,
    sample_label: str = "",
) -> UserTaskMatrix:
    """Single-calendar-year answer counts (used for entry flags)."""
    user_ids = tuple(sorted(set(users)))
    if not user_ids:
        raise ValueError("users must be nonempty")
    task_ids = tuple(taxonomy.task_ids())
    task_index = {t: i for i, t in enumerate(task_ids)}
    start, end = year_bounds(year)
    per_user = _count_in_range(corpus, taxonomy, user_ids, start, end)
    rows, cols, vals = [], [], []
    for j, uid in enumerate(user_ids):
        for task, n in sorted(per_user[uid].items()):
            rows.append(task_index[task])
            cols.append(j)
            vals.append(n)
    counts = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(task_ids), len(user_ids)), dtype=np.int64
    )
    return UserTaskMatrix(year, task_ids, user_ids, counts, sample_label)


def task_share_change(
    corpus: Corpus,
    taxonomy: TaskTaxonomy,
    year_a: int,
    year_b: int,
    users: Iterable[int] | None = None,
) -> dict[int, tuple[float, float, float]]:
    """Per task: (share in year_a, share in year_b, delta).

    A task's share of a year is its active-user count over the sum of
    active-user counts across tasks (a user active in k tasks counts k
    times), so the deltas sum to zero.
    """
    user_pool = set(users) if users is not None else set(corpus.user_answers)

    def shares(year: int) -> dict[int, float]:
        start, end = year_bounds(year)
        per_user = _count_in_range(corpus, taxonomy, user_pool, start, end)
        task_users: dict[int, int] = {t: 0 for t in taxonomy.task_ids()}
        for task_counts in per_user.values():
            for task in task_counts:
                task_users[task] += 1
        total = sum(task_users.values())
        if total == 0:
            raise ValueError(f"no task activity in year {year}")
        return {t: n / total for t, n in task_users.items()}

    shares_a = shares(year_a)
    shares_b = shares(year_b)
    return {
        t: (shares_a[t], shares_b[t], shares_b[t] - shares_a[t]) for t in taxonomy.task_ids()
    }
