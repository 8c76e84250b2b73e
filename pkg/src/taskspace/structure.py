"""Task-language ecology: who serves which tasks, how nested the mapping is,
and how languages trade tasks over time.

The user-count matrix U counts, per task and canonical language, the users
with at least one in-window answer to a question carrying both a tag of the
task and a tag of the language.  The binary matrix A thresholds U.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, year_bounds
from .taxonomy import TaskTaxonomy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TaskLanguageMatrix:
    task_ids: tuple[int, ...]
    languages: tuple[str, ...]
    users: np.ndarray  # (n_tasks, n_languages) int64 user counts
    active: np.ndarray  # users >= threshold
    window: tuple[int, int]  # inclusive year range
    user_threshold: int


@dataclass(frozen=True)
class NodfScore:
    total: float
    row_component: float
    column_component: float


def task_language_matrix(
    corpus: Corpus,
    taxonomy: TaskTaxonomy,
    language_map: Mapping[int, str],
    window: tuple[int, int],
    user_threshold: int = 10,
    languages: Sequence[str] | None = None,
) -> TaskLanguageMatrix:
    """User counts per (task, canonical language) over the year window."""
    langs = tuple(sorted(set(languages if languages is not None else language_map.values())))
    lang_index = {name: i for i, name in enumerate(langs)}
    task_ids = tuple(taxonomy.task_ids())
    task_index = {t: i for i, t in enumerate(task_ids)}
    start = year_bounds(window[0])[0]
    end = year_bounds(window[1])[1]

    seen: set[tuple[int, int, int]] = set()  # (user, task_idx, lang_idx)
    for ans in corpus.iter_answers():
        if not start <= ans.created_at < end:
            continue
        tags = corpus.questions[ans.question_id].tag_ids
        tasks = {taxonomy.tag_to_task[t] for t in tags if t in taxonomy.tag_to_task}
        langs_here = {
            lang_index[language_map[t]]
            for t in tags
            if t in language_map and language_map[t] in lang_index
        }
        for task in tasks:
            ti = task_index[task]
            for li in langs_here:
                seen.add((ans.user_id, ti, li))

    users = np.zeros((len(task_ids), len(langs)), dtype=np.int64)
    for _, ti, li in seen:
        users[ti, li] += 1
    return TaskLanguageMatrix(
        task_ids, langs, users, users >= user_threshold, window, user_threshold
    )


def nodf(a: np.ndarray) -> NodfScore:
    """Nestedness by overlap and decreasing fill, in [0, 100].

    For an ordered pair with strictly decreasing degree the contribution is
    the overlap share of the smaller degree times 100; equal-degree pairs
    (and pairs involving an empty line) contribute 0.  The score averages
    over all row pairs and all column pairs.
    """
    a = np.asarray(a, dtype=bool).astype(np.int64)
    if a.size == 0:
        raise ValueError("matrix is empty")

    def pairs_sum(m: np.ndarray) -> tuple[float, int]:
        deg = m.sum(axis=1)
        n = m.shape[0]
        total = 0.0
        overlaps = m @ m.T
        for i in range(n - 1):
            for j in range(i + 1, n):
                hi, lo = (i, j) if deg[i] > deg[j] else (j, i)
                if deg[hi] == deg[lo] or deg[lo] == 0:
                    continue
                total += overlaps[hi, lo] / deg[lo] * 100.0
        return total, n * (n - 1) // 2

    row_sum, row_pairs = pairs_sum(a)
    col_sum, col_pairs = pairs_sum(a.T)
    row_comp = row_sum / row_pairs if row_pairs else 0.0
    col_comp = col_sum / col_pairs if col_pairs else 0.0
    denom = row_pairs + col_pairs
    total = (row_sum + col_sum) / denom if denom else 0.0
    return NodfScore(total, row_comp, col_comp)


def top_language_series(
    matrices_by_year: Mapping[int, TaskLanguageMatrix], language: str
) -> dict[int, int]:
    """Per year: number of tasks where the language leads by user count.

    Only languages with at least one user compete; ties go to the
    alphabetically first name.
    """
    out: dict[int, int] = {}
    for year in sorted(matrices_by_year):
        matrix = matrices_by_year[year]
        count = 0
        for ti in range(len(matrix.task_ids)):
            row = matrix.users[ti]
            if row.max() == 0:
                continue
            top = min(
                (name for li, name in enumerate(matrix.languages) if row[li] > 0),
                key=lambda name: (-row[matrix.languages.index(name)], name),
            )
            count += top == language
        out[year] = count
    return out


def language_footprint(
    matrix: TaskLanguageMatrix, language: str, k: int = 3
) -> dict[int, int]:
    """task_id -> rank of the language (1-based) where the rank is <= k.

    Ranking orders languages by user count descending, names ascending;
    tasks where the language has no users are absent.
    """
    if language not in matrix.languages:
        raise ValueError(f"unknown language {language!r}")
    li = matrix.languages.index(language)
    out: dict[int, int] = {}
    for ti, task in enumerate(matrix.task_ids):
        row = matrix.users[ti]
        if row[li] == 0:
            continue
        ranked = sorted(
            (name for j, name in enumerate(matrix.languages) if row[j] > 0),
            key=lambda name: (-row[matrix.languages.index(name)], name),
        )
        rank = ranked.index(language) + 1
        if rank <= k:
            out[task] = rank
    return out


def reweight_languages(
    matrix: TaskLanguageMatrix, external_shares: Mapping[str, float]
) -> TaskLanguageMatrix:
    """Scale each language column so platform shares match external shares.

    Languages absent from the share table keep weight 1 with a warning; a
    zero platform share with a positive external share is an error.
    """
    totals = matrix.users.sum(axis=0).astype(np.float64)
    grand = totals.sum()
    if grand == 0:
        raise ValueError("matrix has no users")
    platform_shares = totals / grand
    factors = np.ones(len(matrix.languages))
    for li, name in enumerate(matrix.languages):
        if name not in external_shares:
            logger.warning("language %r missing from external shares; weight 1", name)
            continue
        ext = external_shares[name]
        if platform_shares[li] == 0:
            if ext > 0:
                raise ValueError(f"language {name!r} has zero platform share but external share {ext}")
            continue
        factors[li] = ext / platform_shares[li]
    reweighted = matrix.users * factors[None, :]
    return TaskLanguageMatrix(
        matrix.task_ids,
        matrix.languages,
        reweighted,
        reweighted >= matrix.user_threshold,
        matrix.window,
        matrix.user_threshold,
    )


def pairwise_dominance(
    matrices_by_year: Mapping[int, TaskLanguageMatrix], lang_a: str, lang_b: str
) -> dict[int, tuple[int, int]]:
    """Per year: (#tasks where A has strictly more users than B, and vice
    versa).  Ties count for neither."""
    out: dict[int, tuple[int, int]] = {}
    for year in sorted(matrices_by_year):
        matrix = matrices_by_year[year]
        for lang in (lang_a, lang_b):
            if lang not in matrix.languages:
                raise ValueError(f"unknown language {lang!r}")
        ai = matrix.languages.index(lang_a)
        bi = matrix.languages.index(lang_b)
        a_col = matrix.users[:, ai]
        b_col = matrix.users[:, bi]
        out[year] = (int((a_col > b_col).sum()), int((b_col > a_col).sum()))
    return out
