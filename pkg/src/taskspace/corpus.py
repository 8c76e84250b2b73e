"""Immutable store for the question-answer corpus and its auxiliary datasets.

The on-disk formats are line-oriented JSON for posts and plain CSV for the
tag table and side datasets.  Tags are keyed by name in the input files;
loading assigns dense integer ids (sorted-name order) so downstream matrix
code can index arrays directly.  A snapshot directory written by
:func:`save_corpus` reloads and re-saves bit-identically.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

QUESTIONS_FILE = "questions.jsonl"
ANSWERS_FILE = "answers.jsonl"
TAGS_FILE = "tags.csv"


class CorpusFormatError(ValueError):
    """A record could not be parsed; the message carries the line number."""


class CorpusIntegrityError(ValueError):
    """Referential integrity between questions, answers, and tags is broken."""


@dataclass(frozen=True)
class Question:
    question_id: int
    created_at: int  # UTC epoch seconds
    tag_ids: frozenset[int]


@dataclass(frozen=True)
class Answer:
    answer_id: int
    question_id: int
    user_id: int
    created_at: int
    votes: int


@dataclass(frozen=True)
class Tag:
    tag_id: int
    name: str
    usage_count: int
    is_language: bool
    canonical_language: str | None = None


@dataclass(frozen=True)
class SurveyRespondent:
    respondent_id: int
    salary: float
    tags: frozenset[str]


@dataclass(frozen=True)
class JobRequirement:
    text: str
    embedding: tuple[float, ...]


@dataclass(frozen=True)
class JobAd:
    job_id: int
    year: int
    salary: float | None
    requirements: tuple[JobRequirement, ...]


@dataclass(frozen=True)
class TaskLabel:
    task_id: int
    short_label: str
    long_label: str
    embedding: tuple[float, ...]


@dataclass
class Corpus:
    """Questions, answers, and the tag table, plus derived lookup indices.

    Treated as immutable after load; all operations are pure reads.
    """

    questions: dict[int, Question]
    answers: dict[int, Answer]
    tags: dict[int, Tag]
    question_answers: dict[int, list[int]] = field(default_factory=dict)
    user_answers: dict[int, list[int]] = field(default_factory=dict)
    tag_id_by_name: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.tag_id_by_name:
            self.tag_id_by_name = {t.name: t.tag_id for t in self.tags.values()}
        if not self.question_answers and not self.user_answers:
            self._build_indices()
        self.validate()

    def _build_indices(self) -> None:
        q_index: dict[int, list[int]] = {}
        u_index: dict[int, list[int]] = {}
        for aid in sorted(self.answers):
            ans = self.answers[aid]
            q_index.setdefault(ans.question_id, []).append(aid)
            u_index.setdefault(ans.user_id, []).append(aid)
        self.question_answers = q_index
        self.user_answers = u_index

    def validate(self) -> None:
        """Check referential integrity; raise CorpusIntegrityError on failure."""
        tag_ids = set(self.tags)
        for q in self.questions.values():
            if not q.tag_ids:
                raise CorpusIntegrityError(f"question {q.question_id} has no tags")
            missing = q.tag_ids - tag_ids
            if missing:
                raise CorpusIntegrityError(
                    f"question {q.question_id} references unknown tag ids {sorted(missing)}"
                )
        dangling = sorted(
            a.answer_id for a in self.answers.values() if a.question_id not in self.questions
        )
        if dangling:
            raise CorpusIntegrityError(
                f"answers referencing absent questions: {dangling[:20]}"
                + (" ..." if len(dangling) > 20 else "")
            )
        for a in self.answers.values():
            if a.votes < 0:
                raise CorpusIntegrityError(f"answer {a.answer_id} has negative votes")
        # indices must agree with the tables
        n_indexed = sum(len(v) for v in self.question_answers.values())
        if n_indexed != len(self.answers):
            raise CorpusIntegrityError("question->answer index out of sync")

    # -- convenience reads ------------------------------------------------

    def iter_questions(self) -> Iterable[Question]:
        for qid in sorted(self.questions):
            yield self.questions[qid]

    def iter_answers(self) -> Iterable[Answer]:
        for aid in sorted(self.answers):
            yield self.answers[aid]

    def answer_tags(self, answer: Answer) -> frozenset[int]:
        """Tags an answer inherits from its question (resolved at query time)."""
        return self.questions[answer.question_id].tag_ids

    def counts(self) -> tuple[int, int, int]:
        return len(self.questions), len(self.answers), len(self.tags)


# -- timestamp handling ---------------------------------------------------


def parse_rfc3339(value: str) -> int:
    """RFC3339 timestamp -> UTC epoch seconds. Naive times are taken as UTC."""
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_rfc3339(epoch_seconds: int) -> str:
    dt = datetime.fromtimestamp(int(epoch_seconds), tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def year_of(epoch_seconds: int) -> int:
    return datetime.fromtimestamp(int(epoch_seconds), tz=timezone.utc).year


def year_bounds(year: int) -> tuple[int, int]:
    """[start, end) epoch seconds of a UTC calendar year."""
    start = int(datetime(year, 1, 1, tzinfo=timezone.utc).timestamp())
    end = int(datetime(year + 1, 1, 1, tzinfo=timezone.utc).timestamp())
    return start, end


def day_minute(epoch_seconds: int) -> int:
    """Minute-of-day on the 1440-minute UTC clock."""
    return (int(epoch_seconds) % 86400) // 60


# -- loading ---------------------------------------------------------------


def _jsonl_records(path: Path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path.name}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorpusFormatError(f"{path.name}:{lineno}: expected an object")
            yield lineno, obj


def load_tags(path: Path | str) -> dict[int, Tag]:
    """Read tags.csv and assign dense ids in sorted-name order."""
    path = Path(path)
    rows: list[tuple[str, int, bool, str | None]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"tag", "count", "is_language", "canonical_language"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise CorpusFormatError(f"{path.name}: header must contain {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                name = row["tag"].strip()
                count = int(row["count"])
                is_lang = row["is_language"].strip().lower() in ("1", "true", "yes")
                canon = row["canonical_language"].strip() or None
            except (KeyError, ValueError, AttributeError) as exc:
                raise CorpusFormatError(f"{path.name}:{lineno}: malformed tag row") from exc
            if not name:
                raise CorpusFormatError(f"{path.name}:{lineno}: empty tag name")
            if count < 0:
                raise CorpusFormatError(f"{path.name}:{lineno}: negative usage count")
            if canon is not None and not is_lang:
                raise CorpusFormatError(
                    f"{path.name}:{lineno}: canonical_language set on non-language tag {name!r}"
                )
            rows.append((name, count, is_lang, canon))
    names = [r[0] for r in rows]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise CorpusIntegrityError(f"duplicate tag names: {dupes}")
    tags: dict[int, Tag] = {}
    for tag_id, (name, count, is_lang, canon) in enumerate(
        sorted(rows, key=lambda r: r[0])
    ):
        tags[tag_id] = Tag(tag_id, name, count, is_lang, canon)
    return tags


def load_questions(path: Path | str, tag_id_by_name: Mapping[str, int]) -> dict[int, Question]:
    path = Path(path)
    questions: dict[int, Question] = {}
    for lineno, obj in _jsonl_records(path):
        try:
            qid = int(obj["id"])
            created = parse_rfc3339(obj["created_at"])
            tag_names = obj["tags"]
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(f"{path.name}:{lineno}: malformed question record") from exc
        if not isinstance(tag_names, list) or not tag_names:
            raise CorpusFormatError(f"{path.name}:{lineno}: question {qid} needs a nonempty tag list")
        if qid in questions:
            raise CorpusIntegrityError(f"duplicate question id {qid} at {path.name}:{lineno}")
        tag_ids = set()
        for name in tag_names:
            if name not in tag_id_by_name:
                raise CorpusIntegrityError(
                    f"{path.name}:{lineno}: question {qid} uses unknown tag {name!r}"
                )
            tag_ids.add(tag_id_by_name[name])
        questions[qid] = Question(qid, created, frozenset(tag_ids))
    return questions


def load_answers(path: Path | str) -> dict[int, Answer]:
    path = Path(path)
    answers: dict[int, Answer] = {}
    for lineno, obj in _jsonl_records(path):
        try:
            aid = int(obj["id"])
            rec = Answer(
                answer_id=aid,
                question_id=int(obj["question_id"]),
                user_id=int(obj["user_id"]),
                created_at=parse_rfc3339(obj["created_at"]),
                votes=int(obj["votes"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(f"{path.name}:{lineno}: malformed answer record") from exc
        if aid in answers:
            raise CorpusIntegrityError(f"duplicate answer id {aid} at {path.name}:{lineno}")
        answers[aid] = rec
    return answers


def load_corpus(directory: Path | str) -> Corpus:
    """Load questions.jsonl, answers.jsonl, and tags.csv from a directory."""
    directory = Path(directory)
    tags = load_tags(directory / TAGS_FILE)
    tag_id_by_name = {t.name: t.tag_id for t in tags.values()}
    questions = load_questions(directory / QUESTIONS_FILE, tag_id_by_name)
    answers = load_answers(directory / ANSWERS_FILE)
    return Corpus(questions=questions, answers=answers, tags=tags)


def save_corpus(corpus: Corpus, directory: Path | str) -> None:
    """Write a canonical snapshot: sorted records, fixed formatting.

    Loading a snapshot and saving it again produces byte-identical files.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    id_to_name = {t.tag_id: t.name for t in corpus.tags.values()}
    with open(directory / QUESTIONS_FILE, "w", encoding="utf-8") as fh:
        for q in corpus.iter_questions():
            rec = {
                "id": q.question_id,
                "created_at": format_rfc3339(q.created_at),
                "tags": sorted(id_to_name[t] for t in q.tag_ids),
            }
            fh.write(json.dumps(rec, separators=(",", ":"), sort_keys=True) + "\n")
    with open(directory / ANSWERS_FILE, "w", encoding="utf-8") as fh:
        for a in corpus.iter_answers():
            rec = {
                "id": a.answer_id,
                "question_id": a.question_id,
                "user_id": a.user_id,
                "created_at": format_rfc3339(a.created_at),
                "votes": a.votes,
            }
            fh.write(json.dumps(rec, separators=(",", ":"), sort_keys=True) + "\n")
    with open(directory / TAGS_FILE, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tag", "count", "is_language", "canonical_language"])
        for tag_id in sorted(corpus.tags):
            t = corpus.tags[tag_id]
            writer.writerow(
                [t.name, t.usage_count, str(t.is_language).lower(), t.canonical_language or ""]
            )
    manifest = {
        "counts": dict(zip(("questions", "answers", "tags"), corpus.counts())),
        "tag_index": {t.name: t.tag_id for t in sorted(corpus.tags.values(), key=lambda x: x.tag_id)},
    }
    with open(directory / "index.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- auxiliary datasets -----------------------------------------------------


def load_survey(path: Path | str) -> list[SurveyRespondent]:
    path = Path(path)
    respondents: list[SurveyRespondent] = []
    seen: set[int] = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                rid = int(row["respondent_id"])
                salary = float(row["salary"])
                tags = frozenset(t.strip() for t in row["tags"].split(";") if t.strip())
            except (KeyError, TypeError, ValueError) as exc:
                raise CorpusFormatError(f"{path.name}:{lineno}: malformed survey row") from exc
            if salary <= 0:
                raise CorpusFormatError(f"{path.name}:{lineno}: respondent {rid} salary must be > 0")
            if not tags:
                raise CorpusFormatError(f"{path.name}:{lineno}: respondent {rid} has no tags")
            if rid in seen:
                raise CorpusIntegrityError(f"duplicate respondent id {rid}")
            seen.add(rid)
            respondents.append(SurveyRespondent(rid, salary, tags))
    return respondents


def load_job_ads(path: Path | str) -> list[JobAd]:
    path = Path(path)
    ads: list[JobAd] = []
    seen: set[int] = set()
    dim: int | None = None
    for lineno, obj in _jsonl_records(path):
        try:
            jid = int(obj["job_id"])
            year = int(obj["year"])
            salary = obj.get("salary")
            salary = None if salary is None else float(salary)
            reqs = tuple(
                JobRequirement(str(r["text"]), tuple(float(x) for x in r["embedding"]))
                for r in obj["requirements"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(f"{path.name}:{lineno}: malformed job ad record") from exc
        if salary is not None and salary <= 0:
            raise CorpusFormatError(f"{path.name}:{lineno}: job {jid} salary must be > 0")
        for r in reqs:
            if dim is None:
                dim = len(r.embedding)
            elif len(r.embedding) != dim:
                raise CorpusFormatError(
                    f"{path.name}:{lineno}: job {jid} embedding dimension "
                    f"{len(r.embedding)} != {dim}"
                )
        if jid in seen:
            raise CorpusIntegrityError(f"duplicate job id {jid}")
        seen.add(jid)
        ads.append(JobAd(jid, year, salary, reqs))
    return ads


def load_task_labels(path: Path | str) -> dict[int, TaskLabel]:
    path = Path(path)
    labels: dict[int, TaskLabel] = {}
    for lineno, obj in _jsonl_records(path):
        try:
            tid = int(obj["task_id"])
            label = TaskLabel(
                task_id=tid,
                short_label=str(obj["short_label"]),
                long_label=str(obj["long_label"]),
                embedding=tuple(float(x) for x in obj["embedding"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(f"{path.name}:{lineno}: malformed task label record") from exc
        if tid in labels:
            raise CorpusIntegrityError(f"duplicate task label id {tid}")
        labels[tid] = label
    return labels


def load_language_shares(path: Path | str) -> dict[tuple[str, int], float]:
    """language_shares.csv -> {(language, year): external_share}."""
    path = Path(path)
    shares: dict[tuple[str, int], float] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                key = (row["language"].strip(), int(row["year"]))
                value = float(row["external_share"])
            except (KeyError, TypeError, ValueError) as exc:
                raise CorpusFormatError(f"{path.name}:{lineno}: malformed share row") from exc
            if not 0 <= value <= 1:
                raise CorpusFormatError(f"{path.name}:{lineno}: share must be in [0,1]")
            shares[key] = value
    return shares


# -- filters ----------------------------------------------------------------


def filter_tags(corpus: Corpus, min_uses: int = 1000) -> set[int]:
    """Tags used at least min_uses times (language flag untouched)."""
    if min_uses < 1:
        raise ValueError("min_uses must be >= 1")
    return {t.tag_id for t in corpus.tags.values() if t.usage_count >= min_uses}


def select_active_users(corpus: Corpus, min_answers: int = 10) -> set[int]:
    """Users with at least min_answers answer posts."""
    if min_answers < 1:
        raise ValueError("min_answers must be >= 1")
    return {
        uid for uid, answers in corpus.user_answers.items() if len(answers) >= min_answers
    }


def split_users(users: Iterable[int], seed: int) -> tuple[set[int], set[int]]:
    """Random partition into two near-equal samples; deterministic per seed."""
    ordered: Sequence[int] = sorted(users)
    if len(ordered) < 2:
        raise ValueError("need at least two users to split")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ordered))
    half = (len(ordered) + 1) // 2
    sample_1 = {ordered[i] for i in perm[:half]}
    sample_2 = {ordered[i] for i in perm[half:]}
    return sample_1, sample_2
