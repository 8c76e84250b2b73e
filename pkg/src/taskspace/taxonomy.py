"""From raw tag communities to the final task taxonomy.

Communities coming out of the blockmodel are noisy: ubiquitous tags attach
to many communities.  Each tag gets an over-representation score against its
own community, the weakest fifth of every community is cut, and undersized
communities are dropped.  Language tags are canonicalized separately
(version tags collapse onto one name) for the language analyses.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .blockmodel import Partition
from .corpus import Corpus, Tag, TaskLabel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TagProjection:
    """Symmetric tag co-occurrence weights with a fixed zero diagonal."""

    tag_ids: tuple[int, ...]
    weights: np.ndarray  # (n_tags, n_tags) float64

    def __post_init__(self):
        w = self.weights
        if w.shape != (len(self.tag_ids), len(self.tag_ids)):
            raise ValueError("weight matrix shape does not match tag ids")
        if not np.allclose(w, w.T):
            raise ValueError("weights must be symmetric")
        if (w < 0).any():
            raise ValueError("weights must be nonnegative")
        if np.diagonal(w).any():
            raise ValueError("diagonal must be zero")


@dataclass
class Task:
    task_id: int
    tag_ids: frozenset[int]
    short_label: str = ""
    long_label: str = ""
    embedding: tuple[float, ...] = ()


@dataclass
class TaskTaxonomy:
    tasks: dict[int, Task]
    tag_to_task: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.tag_to_task:
            self.tag_to_task = {
                tag: task.task_id for task in self.tasks.values() for tag in task.tag_ids
            }
        counted = sum(len(t.tag_ids) for t in self.tasks.values())
        if counted != len(self.tag_to_task):
            raise ValueError("tasks must be disjoint")

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    def task_ids(self) -> list[int]:
        return sorted(self.tasks)


def tag_projection(corpus: Corpus, tag_ids: Iterable[int]) -> TagProjection:
    """Co-occurrence weights: number of questions where both tags appear."""
    ids = tuple(sorted(tag_ids))
    index = {t: i for i, t in enumerate(ids)}
    n = len(ids)
    w = np.zeros((n, n), dtype=np.float64)
    for q in corpus.questions.values():
        present = sorted(index[t] for t in q.tag_ids if t in index)
        for i, a in enumerate(present):
            for b in present[i + 1 :]:
                w[a, b] += 1.0
                w[b, a] += 1.0
    return TagProjection(ids, w)


def tag_overrepresentation(
    projection: TagProjection, partition: Partition
) -> tuple[np.ndarray, list[int], np.ndarray]:
    """O[t, c]: weight share of tag t in community c over the community's
    overall weight share.

    Returns (O, community order, zero-weight row mask).  Tags with no
    co-occurrence weight at all get an all-zero row and are flagged.
    """
    ids = projection.tag_ids
    index = {t: i for i, t in enumerate(ids)}
    communities = sorted(range(len(partition.tag_blocks)), key=lambda c: min(partition.tag_blocks[c]))
    membership = np.full(len(ids), -1, dtype=np.int64)
    for order, c in enumerate(communities):
        for t in partition.tag_blocks[c]:
            if t in index:
                membership[index[t]] = order
    if (membership < 0).any():
        missing = [ids[i] for i in np.flatnonzero(membership < 0)]
        raise ValueError(f"partition does not cover tags {missing[:10]}")

    comm_matrix = np.zeros((len(ids), len(communities)))
    np.add.at(comm_matrix.T, membership, projection.weights)
    # comm_matrix[t, c] = w_tc, summed tag-to-community weight
    total = comm_matrix.sum()
    if total == 0:
        raise ValueError("projection has zero total weight")
    row_tot = comm_matrix.sum(axis=1, keepdims=True)
    col_share = comm_matrix.sum(axis=0, keepdims=True) / total
    zero_rows = row_tot[:, 0] == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        o = comm_matrix / row_tot / col_share
    o[~np.isfinite(o)] = 0.0  # zero-weight tags and zero-weight communities
    o[zero_rows] = 0.0
    return o, communities, zero_rows


def prune_taxonomy(
    partition: Partition,
    projection: TagProjection,
    o_matrix: np.ndarray,
    communities: Sequence[int],
    drop_frac: float = 0.2,
    min_size: int = 3,
    usage_counts: Mapping[int, int] | None = None,
) -> TaskTaxonomy:
    """Cut the weakest floor(drop_frac * size) tags of each community, then
    drop communities left with fewer than min_size tags.

    Ties in the over-representation score keep the tag with the higher usage
    count (then the higher tag id), so prominent tags survive.
    """
    if not 0 <= drop_frac < 1:
        raise ValueError("drop_frac must be in [0, 1)")
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    usage_counts = usage_counts or {}
    index = {t: i for i, t in enumerate(projection.tag_ids)}

    surviving: list[frozenset[int]] = []
    for order, c in enumerate(communities):
        members = sorted(partition.tag_blocks[c])
        n_drop = int(np.floor(drop_frac * len(members)))
        scored = sorted(
            members,
            key=lambda t: (o_matrix[index[t], order], usage_counts.get(t, 0), t),
        )
        kept = frozenset(scored[n_drop:])
        if len(kept) >= min_size:
            surviving.append(kept)

    surviving.sort(key=min)
    tasks = {i: Task(task_id=i, tag_ids=block) for i, block in enumerate(surviving)}
    return TaskTaxonomy(tasks)


def attach_labels(taxonomy: TaskTaxonomy, labels: Mapping[int, TaskLabel]) -> TaskTaxonomy:
    """Attach ingested short/long labels and embeddings by task id."""
    for task_id, task in taxonomy.tasks.items():
        if task_id in labels:
            lab = labels[task_id]
            task.short_label = lab.short_label
            task.long_label = lab.long_label
            task.embedding = tuple(lab.embedding)
    return taxonomy


def load_language_rules(path: Path | str) -> dict[str, str]:
    """language_rules.csv: tag -> canonical language name."""
    rules: dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rules[row["tag"].strip()] = row["canonical_language"].strip()
    return rules


def canonicalize_languages(
    tags: Mapping[int, Tag], rules: Mapping[str, str]
) -> dict[int, str]:
    """Map every language tag to exactly one canonical language name.

    Tags without a rule map to their own name.  Rules pointing at tags that
    do not exist are skipped with a warning; rule targets must be known
    language names.
    """
    by_name = {t.name: t for t in tags.values()}
    known_names = {t.name for t in tags.values() if t.is_language}
    known_names |= {t.canonical_language for t in tags.values() if t.canonical_language}
    for source, target in rules.items():
        if target not in known_names:
            raise ValueError(f"rule target {target!r} is not a known language name")
        if source not in by_name:
            logger.warning("language rule for unknown tag %r skipped", source)

    mapping: dict[int, str] = {}
    for tag in tags.values():
        if not tag.is_language:
            continue
        if tag.name in rules:
            mapping[tag.tag_id] = rules[tag.name]
        elif tag.canonical_language:
            mapping[tag.tag_id] = tag.canonical_language
        else:
            mapping[tag.tag_id] = tag.name
    return mapping


# -- persistence -------------------------------------------------------------


def save_taxonomy(path: Path | str, taxonomy: TaskTaxonomy, tag_names: Mapping[int, str]) -> None:
    payload = {
        "tasks": [
            {
                "task_id": task.task_id,
                "tags": sorted(tag_names[t] for t in task.tag_ids),
                "short_label": task.short_label,
                "long_label": task.long_label,
            }
            for task in (taxonomy.tasks[i] for i in taxonomy.task_ids())
        ]
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_taxonomy(path: Path | str, tag_id_by_name: Mapping[str, int]) -> TaskTaxonomy:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    tasks = {}
    for entry in payload["tasks"]:
        tid = int(entry["task_id"])
        tasks[tid] = Task(
            task_id=tid,
            tag_ids=frozenset(tag_id_by_name[name] for name in entry["tags"]),
            short_label=entry.get("short_label", ""),
            long_label=entry.get("long_label", ""),
        )
    return TaskTaxonomy(tasks)
