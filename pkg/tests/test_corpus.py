import json
from pathlib import Path

import numpy as np
import pytest

from taskspace import corpus as cp


def write_inputs(tmp_path: Path, questions, answers, tags):
    with open(tmp_path / "questions.jsonl", "w") as fh:
        for q in questions:
            fh.write(json.dumps(q) + "\n")
    with open(tmp_path / "answers.jsonl", "w") as fh:
        for a in answers:
            fh.write(json.dumps(a) + "\n")
    with open(tmp_path / "tags.csv", "w") as fh:
        fh.write("tag,count,is_language,canonical_language\n")
        for row in tags:
            fh.write(",".join(str(x) for x in row) + "\n")


TAGS = [("python", 5000, "true", ""), ("numpy", 1200, "false", ""), ("flask", 999, "false", "")]
QUESTIONS = [
    {"id": 1, "created_at": "2020-01-02T03:04:05Z", "tags": ["python", "numpy"]},
    {"id": 2, "created_at": "2020-06-01T10:00:00Z", "tags": ["flask"]},
    {"id": 3, "created_at": "2021-02-01T00:00:00Z", "tags": ["python"]},
]
ANSWERS = [
    {"id": 10, "question_id": 1, "user_id": 100, "created_at": "2020-01-02T04:00:00Z", "votes": 3},
    {"id": 11, "question_id": 1, "user_id": 101, "created_at": "2020-01-03T04:00:00Z", "votes": 0},
    {"id": 12, "question_id": 2, "user_id": 100, "created_at": "2020-06-02T00:00:00Z", "votes": 1},
    {"id": 13, "question_id": 3, "user_id": 101, "created_at": "2021-02-02T00:00:00Z", "votes": 2},
    {"id": 14, "question_id": 3, "user_id": 102, "created_at": "2021-02-03T00:00:00Z", "votes": 0},
]


def test_load_counts(tmp_path):
    write_inputs(tmp_path, QUESTIONS, ANSWERS, TAGS)
    corpus = cp.load_corpus(tmp_path)
    assert corpus.counts() == (3, 5, 3)


def test_dangling_answer_rejected(tmp_path):
    bad = ANSWERS + [
        {"id": 15, "question_id": 99, "user_id": 1, "created_at": "2020-01-01T00:00:00Z", "votes": 0}
    ]
    write_inputs(tmp_path, QUESTIONS, bad, TAGS)
    with pytest.raises(cp.CorpusIntegrityError, match="15"):
        cp.load_corpus(tmp_path)


def test_malformed_record_reports_line(tmp_path):
    write_inputs(tmp_path, QUESTIONS, ANSWERS, TAGS)
    with open(tmp_path / "answers.jsonl", "a") as fh:
        fh.write("{not json}\n")
    with pytest.raises(cp.CorpusFormatError, match="answers.jsonl:6"):
        cp.load_corpus(tmp_path)


def test_duplicate_answer_id_rejected(tmp_path):
    dupe = ANSWERS + [ANSWERS[0]]
    write_inputs(tmp_path, QUESTIONS, dupe, TAGS)
    with pytest.raises(cp.CorpusIntegrityError, match="duplicate answer id 10"):
        cp.load_corpus(tmp_path)


def test_unknown_tag_rejected(tmp_path):
    bad_q = QUESTIONS + [{"id": 4, "created_at": "2020-01-01T00:00:00Z", "tags": ["rust"]}]
    write_inputs(tmp_path, bad_q, ANSWERS, TAGS)
    with pytest.raises(cp.CorpusIntegrityError, match="rust"):
        cp.load_corpus(tmp_path)


def test_snapshot_roundtrip_bit_identical(tmp_path, minicorpus_dir):
    # save -> load -> save must reproduce the snapshot byte for byte
    corpus = cp.load_corpus(minicorpus_dir)
    snap1 = tmp_path / "snap1"
    snap2 = tmp_path / "snap2"
    cp.save_corpus(corpus, snap1)
    reloaded = cp.load_corpus(snap1)
    cp.save_corpus(reloaded, snap2)
    for name in (cp.QUESTIONS_FILE, cp.ANSWERS_FILE, cp.TAGS_FILE, "index.json"):
        assert (snap1 / name).read_bytes() == (snap2 / name).read_bytes(), name
    assert reloaded.counts() == corpus.counts()


def test_rfc3339_parsing_variants():
    assert cp.parse_rfc3339("2020-01-01T00:00:00Z") == cp.parse_rfc3339("2020-01-01T00:00:00+00:00")
    assert cp.parse_rfc3339("2020-01-01T01:00:00+01:00") == cp.parse_rfc3339("2020-01-01T00:00:00Z")


def test_day_minute():
    ts = cp.parse_rfc3339("2020-01-01T10:30:15Z")
    assert cp.day_minute(ts) == 10 * 60 + 30


class TestFilterTags:
    def make(self, tmp_path, counts):
        tags = [(f"t{i}", c, "false", "") for i, c in enumerate(counts)]
        qs = [{"id": 1, "created_at": "2020-01-01T00:00:00Z", "tags": ["t0"]}]
        write_inputs(tmp_path, qs, [], tags)
        return cp.load_corpus(tmp_path)

    def test_boundaries(self, tmp_path):
        corpus = self.make(tmp_path, [999, 1000, 1500])
        kept = filter_names(corpus, cp.filter_tags(corpus, min_uses=1000))
        assert kept == {"t1", "t2"}

    def test_matches_linear_scan(self, tmp_path):
        rng = np.random.default_rng(0)
        counts = rng.integers(0, 2000, size=40).tolist()
        corpus = self.make(tmp_path, counts)
        got = cp.filter_tags(corpus, min_uses=700)
        expected = set()
        for tag in corpus.tags.values():  # brute-force scan
            if tag.usage_count >= 700:
                expected.add(tag.tag_id)
        assert got == expected

    def test_monotone_in_threshold(self, tmp_path):
        rng = np.random.default_rng(1)
        corpus = self.make(tmp_path, rng.integers(0, 500, size=30).tolist())
        previous = None
        for min_uses in (1, 50, 100, 200, 400):
            current = cp.filter_tags(corpus, min_uses)
            if previous is not None:
                assert current <= previous
            previous = current


def filter_names(corpus, tag_ids):
    return {corpus.tags[t].name for t in tag_ids}


class TestActiveUsers:
    def test_boundaries(self, tmp_path):
        qs = [{"id": 1, "created_at": "2020-01-01T00:00:00Z", "tags": ["t0"]}]
        tags = [("t0", 10, "false", "")]
        answers = []
        aid = 0
        for uid, n in ((9, 9), (10, 10), (11, 25)):
            for _ in range(n):
                aid += 1
                answers.append(
                    {"id": aid, "question_id": 1, "user_id": uid,
                     "created_at": "2020-01-01T01:00:00Z", "votes": 0}
                )
        write_inputs(tmp_path, qs, answers, tags)
        corpus = cp.load_corpus(tmp_path)
        assert cp.select_active_users(corpus, 10) == {10, 11}

    def test_matches_groupby(self, minicorpus):
        got = cp.select_active_users(minicorpus, 5)
        counts = {}
        for a in minicorpus.answers.values():
            counts[a.user_id] = counts.get(a.user_id, 0) + 1
        assert got == {u for u, c in counts.items() if c >= 5}


class TestSplitUsers:
    def test_even_split(self):
        s1, s2 = cp.split_users(range(10), seed=7)
        assert len(s1) == len(s2) == 5
        assert s1 | s2 == set(range(10))
        assert not s1 & s2

    def test_deterministic(self):
        assert cp.split_users(range(100), seed=3) == cp.split_users(range(100), seed=3)

    def test_odd_sizes_differ_by_one(self):
        s1, s2 = cp.split_users(range(11), seed=0)
        assert abs(len(s1) - len(s2)) == 1

    def test_partition_property_many_seeds(self):
        users = set(range(57))
        for seed in range(20):
            s1, s2 = cp.split_users(users, seed)
            assert s1 | s2 == users and not s1 & s2

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            cp.split_users([], seed=0)
