"""Builders that turn the corpus and derived matrices into regression rows:
answer-voting rows with the day-minute instrument, task-entry rows for the
diversification analysis, and job-salary rows.
"""

from __future__ import annotations

import logging
import math
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from ..activity import UserTaskMatrix
from ..corpus import Answer, Corpus, JobAd, day_minute, year_of
from ..jobmatch import JobTaskVector
from ..relatedness import RelatednessMatrix
from ..taxonomy import TaskTaxonomy

logger = logging.getLogger(__name__)

MINUTES_PER_DAY = 1440


def circular_mean_minute(minutes: Sequence[int]) -> float:
    """Mean day-minute on the 1440-minute circle.

    Degenerate spreads (resultant length zero) fall back to the plain mean.
    """
    arr = np.asarray(minutes, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no minutes to average")
    angles = arr * (2 * np.pi / MINUTES_PER_DAY)
    s, c = np.sin(angles).mean(), np.cos(angles).mean()
    if np.hypot(s, c) < 1e-12:
        return float(arr.mean() % MINUTES_PER_DAY)
    angle = math.atan2(s, c) % (2 * np.pi)
    return angle * MINUTES_PER_DAY / (2 * np.pi)


def circular_distance(a, b) -> np.ndarray:
    """Shortest distance on the 1440-minute circle, vectorized."""
    d = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))
    return np.minimum(d, MINUTES_PER_DAY - d)


def minute_task_counts(
    answers: Iterable[Answer],
    experience: UserTaskMatrix,
    width: float = 720.0,
) -> np.ndarray:
    """Task experience expected online at each day-minute.

    M[theta, m] = sum_u X[u, theta] * max(0, 1 - dist(m, mean-minute of u) / width)
    with distance on the circular day.  Every user in the experience matrix
    must have at least one answer to define a mean minute.
    """
    minutes_by_user: dict[int, list[int]] = {}
    for ans in answers:
        minutes_by_user.setdefault(ans.user_id, []).append(day_minute(ans.created_at))
    missing = [u for u in experience.user_ids if u not in minutes_by_user]
    if missing:
        raise ValueError(f"users without answers to define a mean minute: {missing[:10]}")

    centers = np.array(
        [circular_mean_minute(minutes_by_user[u]) for u in experience.user_ids]
    )
    grid = np.arange(MINUTES_PER_DAY, dtype=np.float64)
    weights = np.maximum(0.0, 1.0 - circular_distance(grid[None, :], centers[:, None]) / width)
    x = np.asarray(experience.counts.todense(), dtype=np.float64)  # tasks x users
    return x @ weights  # tasks x 1440


def build_voting_rows(
    corpus: Corpus,
    taxonomy: TaskTaxonomy,
    experience_by_window: Mapping[int, UserTaskMatrix],
    minute_counts_by_window: Mapping[int, np.ndarray] | None = None,
) -> pd.DataFrame:
    """One row per (first answer to a question, task of that question).

    The first answer is the earliest by timestamp (ties to the lower answer
    id).  A question touching k tasks yields k rows.  Experience windows
    must cover every answer year encountered.
    """
    task_ids = taxonomy.task_ids()
    task_index = {t: i for i, t in enumerate(task_ids)}
    records = []
    for qid in sorted(corpus.questions):
        answer_ids = corpus.question_answers.get(qid, [])
        if not answer_ids:
            continue
        answers = [corpus.answers[a] for a in answer_ids]
        first = min(answers, key=lambda a: (a.created_at, a.answer_id))
        max_votes = max(a.votes for a in answers)
        total_votes = sum(a.votes for a in answers)
        year = year_of(first.created_at)
        if year not in experience_by_window:
            raise ValueError(f"no experience window for answer year {year}")
        window = experience_by_window[year]
        question = corpus.questions[qid]
        tasks = sorted(
            {taxonomy.tag_to_task[t] for t in question.tag_ids if t in taxonomy.tag_to_task}
        )
        if not tasks:
            continue
        minute = day_minute(question.created_at)
        if first.user_id in window.user_ids:
            user_col = window.column(first.user_id)
        else:
            user_col = np.zeros(len(task_ids), dtype=np.int64)
        for task in tasks:
            experience = int(user_col[task_index[task]])
            record = {
                "question_id": qid,
                "answer_id": first.answer_id,
                "user_id": first.user_id,
                "year": year,
                "task": task,
                "task_year": f"{task}_{year}",
                "top_answer": int(first.votes == max_votes),
                "log_votes": math.log(first.votes + 1),
                "log_experience": math.log(experience + 1),
                "log_n_answers": math.log(len(answers)),
                "log_total_votes": math.log(1 + total_votes),
                "q_minute": minute,
                "gap_seconds": first.created_at - question.created_at,
                "group_task_qminute": f"{task}_{minute}",
            }
            if minute_counts_by_window is not None:
                record["instrument"] = float(minute_counts_by_window[year][task_index[task], minute])
            records.append(record)
    return pd.DataFrame.from_records(records)


def placebo_split(rows: pd.DataFrame) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Split voting rows on whether the first answer arrived within 24 hours."""
    gaps = rows["gap_seconds"].to_numpy()
    if (gaps < 0).any():
        bad = rows.loc[rows["gap_seconds"] < 0, "answer_id"].tolist()[:10]
        raise ValueError(f"answers predating their questions (clock inconsistency): {bad}")
    within = rows[rows["gap_seconds"] <= 86400].reset_index(drop=True)
    after = rows[rows["gap_seconds"] > 86400].reset_index(drop=True)
    return within, after


def build_entry_rows(
    windows: Mapping[int, UserTaskMatrix],
    activities: Mapping[int, UserTaskMatrix],
    r: RelatednessMatrix,
    task_values: Mapping[int, float],
    years: Sequence[int],
) -> pd.DataFrame:
    """At-risk (user, year, task) rows with entry flags and standardized
    log-value and density regressors.

    At risk means zero experience in the two-year window before the year.
    The relatedness matrix must come from the held-out user sample (S1),
    while the experience matrices must come from the analysis sample (S2);
    both are enforced through the provenance labels.  Rows for tasks without
    a value are dropped; the count lands in df.attrs["dropped_missing_value"].
    """
    if r.sample_label != "S1":
        raise ValueError(
            f"entry analysis requires relatedness built from sample S1, got {r.sample_label!r}"
        )
    records = []
    dropped_value = 0
    dropped_isolated = 0
    row_sums = r.values.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = r.values / row_sums[:, None]

    for year in years:
        window = windows[year]
        activity = activities[year]
        if window.sample_label != "S2" or activity.sample_label != "S2":
            raise ValueError("entry analysis requires experience matrices from sample S2")
        if window.task_ids != r.task_ids or activity.task_ids != r.task_ids:
            raise ValueError("task index mismatch between matrices")
        x_window = np.asarray(window.counts.todense(), dtype=np.float64)
        x_activity = np.asarray(activity.counts.todense())
        act_users = {u: j for j, u in enumerate(activity.user_ids)}
        for j, uid in enumerate(window.user_ids):
            exp_vec = x_window[:, j]
            at_risk = np.flatnonzero(exp_vec == 0)
            aj = act_users.get(uid)
            densities = weights @ exp_vec
            for ti in at_risk:
                task = window.task_ids[ti]
                if task not in task_values:
                    dropped_value += 1
                    continue
                if row_sums[ti] <= 0:
                    dropped_isolated += 1
                    continue
                entered = int(aj is not None and x_activity[ti, aj] > 0)
                records.append(
                    {
                        "user_id": uid,
                        "year": year,
                        "task": task,
                        "entry": entered,
                        "log_value_raw": math.log(task_values[task]),
                        "density_raw": float(densities[ti]),
                    }
                )
    df = pd.DataFrame.from_records(records)
    if dropped_value:
        logger.warning("dropped %d at-risk rows lacking a task value", dropped_value)
    if len(df):
        for raw, std in (("log_value_raw", "log_value"), ("density_raw", "density")):
            col = df[raw].to_numpy()
            scale = col.std()
            df[std] = (col - col.mean()) / scale if scale > 0 else 0.0
    df.attrs["dropped_missing_value"] = dropped_value
    df.attrs["dropped_isolated"] = dropped_isolated
    return df


def build_salary_rows(
    ads: Sequence[JobAd],
    vectors: Mapping[int, JobTaskVector],
    r: RelatednessMatrix,
    task_values: Mapping[int, float],
) -> pd.DataFrame:
    """Per job with a posted salary: log salary, mean log task value, mean
    task coherence (density of each required task among the job's other
    tasks), and the task count.  Jobs whose tasks all lack values are
    dropped; the count lands in df.attrs["dropped_unvalued"].
    """
    dropped = 0
    task_index = {t: i for i, t in enumerate(r.task_ids)}
    row_sums = r.values.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = r.values / row_sums[:, None]
    rows = []
    for ad in sorted(ads, key=lambda a: a.job_id):
        vector = vectors.get(ad.job_id)
        if ad.salary is None or vector is None or vector.n_required() == 0:
            continue
        required = [t for t in vector.task_ids if vector.required[task_index[t]] > 0]
        valued = [t for t in required if t in task_values]
        if not valued:
            dropped += 1
            continue
        mean_log_value = float(np.mean([math.log(task_values[t]) for t in valued]))
        coherences = []
        for t in required:
            ti = task_index[t]
            if row_sums[ti] <= 0:
                continue  # isolated task: no neighborhood to be coherent with
            others = vector.required.astype(np.float64).copy()
            others[ti] = 0.0
            coherences.append(float(weights[ti] @ others))
        coherence = float(np.mean(coherences)) if coherences else 0.0
        rows.append(
            {
                "job_id": ad.job_id,
                "year": ad.year,
                "log_salary": math.log(ad.salary),
                "mean_log_value": mean_log_value,
                "coherence": coherence,
                "log_n_tasks": math.log(len(required)),
            }
        )
    df = pd.DataFrame.from_records(rows)
    if dropped:
        logger.warning("dropped %d salaried jobs with no valued tasks", dropped)
    df.attrs["dropped_unvalued"] = dropped
    return df
