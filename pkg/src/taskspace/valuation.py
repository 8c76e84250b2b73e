"""Impute user salaries from survey respondents and aggregate to task values.

A user is matched to the survey respondents whose reported technologies
overlap the user's tags the most; the user's value is the overlap-weighted
mean of matched salaries, and a task's value is the activity-weighted mean
of its users' values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .activity import UserTaskMatrix
from .corpus import Corpus, SurveyRespondent

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RespondentMatch:
    user_id: int
    matches: tuple[tuple[int, int], ...]  # (respondent_id, overlap), overlap desc


class UnmatchedUserError(ValueError):
    pass


def survey_tag_sets(
    survey: Sequence[SurveyRespondent],
    tag_id_by_name: Mapping[str, int],
    aliases: Mapping[str, str] | None = None,
) -> dict[int, frozenset[int]]:
    """Resolve respondents' technology names to tag ids.

    Names go through the optional alias table first; names that still match
    no tag are dropped with one warning per name.
    """
    aliases = aliases or {}
    unknown: set[str] = set()
    out: dict[int, frozenset[int]] = {}
    for resp in survey:
        ids = set()
        for name in resp.tags:
            resolved = aliases.get(name, name)
            if resolved in tag_id_by_name:
                ids.add(tag_id_by_name[resolved])
            else:
                unknown.add(name)
        out[resp.respondent_id] = frozenset(ids)
    for name in sorted(unknown):
        logger.warning("survey technology %r matches no tag; dropped", name)
    return out


def match_respondents(
    user_tags: frozenset[int] | set[int],
    survey: Sequence[SurveyRespondent],
    respondent_tags: Mapping[int, frozenset[int]],
    k: int = 300,
    user_id: int = -1,
) -> RespondentMatch:
    """Top-k respondents by tag overlap; zero-overlap respondents excluded.

    Equal overlaps rank the lower respondent id first.
    """
    if not survey:
        raise ValueError("survey is empty")
    scored = []
    for resp in survey:
        overlap = len(user_tags & respondent_tags[resp.respondent_id])
        if overlap > 0:
            scored.append((-overlap, resp.respondent_id))
    scored.sort()
    top = [(rid, -neg) for neg, rid in scored[:k]]
    return RespondentMatch(user_id=user_id, matches=tuple(top))


def impute_user_value(
    match: RespondentMatch, salaries: Mapping[int, float]
) -> float:
    """Overlap-weighted mean salary of the matched respondents."""
    if not match.matches:
        raise UnmatchedUserError("no respondent with positive overlap")
    total = sum(m for _, m in match.matches)
    if total <= 0:
        raise UnmatchedUserError("matched overlaps sum to zero")
    return sum(salaries[rid] * m for rid, m in match.matches) / total


def user_values(
    user_tags: Mapping[int, frozenset[int]],
    survey: Sequence[SurveyRespondent],
    respondent_tags: Mapping[int, frozenset[int]],
    k: int = 300,
) -> dict[int, float]:
    """Imputed value per user; users with no positive-overlap match skipped."""
    salaries = {r.respondent_id: r.salary for r in survey}
    out: dict[int, float] = {}
    for uid in sorted(user_tags):
        match = match_respondents(user_tags[uid], survey, respondent_tags, k=k, user_id=uid)
        if match.matches:
            out[uid] = impute_user_value(match, salaries)
    return out


def task_values(
    values_by_user: Mapping[int, float], experience: UserTaskMatrix
) -> dict[int, float]:
    """Activity-weighted mean user value per task.

    Users without an imputed value are excluded from both the numerator and
    the denominator.  Tasks with no valued activity are missing from the
    result rather than zero.
    """
    valued_cols = [
        j for j, uid in enumerate(experience.user_ids) if uid in values_by_user
    ]
    if not valued_cols:
        return {}
    x = np.asarray(experience.counts[:, valued_cols].todense(), dtype=np.float64)
    v = np.array([values_by_user[experience.user_ids[j]] for j in valued_cols])
    weight_sums = x.sum(axis=1)
    out: dict[int, float] = {}
    for i, task in enumerate(experience.task_ids):
        if weight_sums[i] > 0:
            out[task] = float((x[i] @ v) / weight_sums[i])
    return out


def user_tag_sets(
    corpus: Corpus, users: Iterable[int], start: int, end: int
) -> dict[int, frozenset[int]]:
    """Tags on questions each user answered within [start, end) epoch seconds."""
    out: dict[int, frozenset[int]] = {}
    for uid in sorted(set(users)):
        tags: set[int] = set()
        for aid in corpus.user_answers.get(uid, ()):
            ans = corpus.answers[aid]
            if start <= ans.created_at < end:
                tags |= corpus.questions[ans.question_id].tag_ids
        out[uid] = frozenset(tags)
    return out
