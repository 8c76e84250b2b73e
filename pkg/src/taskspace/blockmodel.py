"""Bipartite blockmodel: partition tags and questions into blocks by
minimum description length.

The objective is a microcanonical two-layer blockmodel on a simple bipartite
graph.  With tag blocks r, question blocks s, block sizes n_r, and block edge
counts e_rs, the description length in nats is

    likelihood        = sum_rs ln C(n_r * n_s, e_rs)
    edge-matrix prior = ln C(B_t * B_q + E - 1, E)
    partition prior   = per side: ln N + ln C(N-1, B-1) + ln(N! / prod_r n_r!)

All parts are exact, so small instances can be checked against exhaustive
enumeration.  An optional degree-corrected likelihood replaces the first term
with -sum_rs e_rs ln(e_rs / (e_r e_s)) (partition-independent constants
dropped).

Inference is agglomerative: start from many blocks, alternate greedy
single-node sweeps with greedy pairwise merges that halve the block count,
and keep the best state seen at any block count.  Everything is driven by a
single seed and is bit-reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
from scipy.special import gammaln

TAG_SIDE = "tag"
QUESTION_SIDE = "question"

# accept a move only if it beats this margin; guards against float noise
# masquerading as improvement
_EPS = 1e-10


class MixedLayerError(ValueError):
    """A block contains nodes from both layers."""


@dataclass(frozen=True)
class BipartiteGraph:
    """Simple bipartite graph between tags (left) and questions (right)."""

    tag_ids: tuple[int, ...]
    question_ids: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]  # (tag_id, question_id)

    @staticmethod
    def from_edges(
        tag_ids: Iterable[int],
        question_ids: Iterable[int],
        edges: Iterable[tuple[int, int]],
    ) -> "BipartiteGraph":
        tags = tuple(sorted(set(tag_ids)))
        questions = tuple(sorted(set(question_ids)))
        tag_set, q_set = set(tags), set(questions)
        seen: set[tuple[int, int]] = set()
        for t, q in edges:
            if t not in tag_set or q not in q_set:
                raise ValueError(f"edge ({t}, {q}) references unknown node")
            if (t, q) in seen:
                raise ValueError(f"duplicate edge ({t}, {q})")
            seen.add((t, q))
        return BipartiteGraph(tags, questions, tuple(sorted(seen)))

    @property
    def n_tags(self) -> int:
        return len(self.tag_ids)

    @property
    def n_questions(self) -> int:
        return len(self.question_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        tag_index = {t: i for i, t in enumerate(self.tag_ids)}
        q_index = {q: j for j, q in enumerate(self.question_ids)}
        deg_t = np.zeros(self.n_tags, dtype=np.int64)
        deg_q = np.zeros(self.n_questions, dtype=np.int64)
        for t, q in self.edges:
            deg_t[tag_index[t]] += 1
            deg_q[q_index[q]] += 1
        return deg_t, deg_q


@dataclass(frozen=True)
class Partition:
    """Disjoint blocks per side, each block a set of external node ids."""

    tag_blocks: tuple[frozenset[int], ...]
    question_blocks: tuple[frozenset[int], ...]

    @property
    def n_tag_blocks(self) -> int:
        return len(self.tag_blocks)

    @property
    def n_question_blocks(self) -> int:
        return len(self.question_blocks)

    def tag_assignment(self) -> dict[int, int]:
        return {t: r for r, block in enumerate(self.tag_blocks) for t in block}

    def question_assignment(self) -> dict[int, int]:
        return {q: s for s, block in enumerate(self.question_blocks) for q in block}

    @staticmethod
    def from_assignment(
        graph: BipartiteGraph,
        assignment: Mapping[tuple[str, int], int],
    ) -> "Partition":
        """Build from a global node -> block map; mixing layers is an error."""
        sides: dict[int, set[str]] = {}
        members: dict[int, list[tuple[str, int]]] = {}
        for (side, node), block in assignment.items():
            sides.setdefault(block, set()).add(side)
            members.setdefault(block, []).append((side, node))
        for block, layer_set in sides.items():
            if len(layer_set) > 1:
                raise MixedLayerError(f"block {block} mixes layers {sorted(layer_set)}")
        tag_blocks = []
        question_blocks = []
        for block in sorted(members):
            ids = frozenset(node for _, node in members[block])
            if sides[block] == {TAG_SIDE}:
                tag_blocks.append(ids)
            else:
                question_blocks.append(ids)
        return Partition(tuple(tag_blocks), tuple(question_blocks))


@dataclass(frozen=True)
class DescriptionLength:
    total: float
    likelihood_term: float
    edge_matrix_prior: float
    partition_prior: float


@dataclass(frozen=True)
class SbmConfig:
    seed: int
    max_sweeps: int = 10
    b_min: int = 1
    b_max: int | None = None  # default: ceil(2 * sqrt(E))
    restarts: int = 3
    merge_candidates: int = 10
    fine_merge_below: int = 12  # single-merge steps once a side has this few blocks
    degree_corrected: bool = False


def _ln_comb(n, k):
    """ln C(n, k), vectorized."""
    n = np.asarray(n, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


_TABLE_LIMIT = 4_000_000


class _LnCombTable:
    """ln C(n, k) for integer arguments via a ln-factorial lookup table."""

    def __init__(self, max_arg: int):
        self.gl = gammaln(np.arange(max_arg + 1, dtype=np.float64) + 1.0)

    def __call__(self, n, k):
        gl = self.gl
        return gl[n] - gl[k] - gl[n - k]


def _make_lnc(n_left: int, n_right: int, n_edges: int):
    max_arg = n_left * n_right + n_edges + 2
    if max_arg <= _TABLE_LIMIT:
        return _LnCombTable(max_arg)
    return _ln_comb


def _partition_prior(n_nodes: int, sizes: np.ndarray) -> float:
    sizes = sizes[sizes > 0]
    b = len(sizes)
    return float(
        math.log(n_nodes)
        + _ln_comb(n_nodes - 1, b - 1)
        + gammaln(n_nodes + 1)
        - gammaln(sizes + 1).sum()
    )


def _likelihood_ndc(e: np.ndarray, nl: np.ndarray, nr: np.ndarray) -> float:
    return float(_ln_comb(np.outer(nl, nr), e).sum())


def _likelihood_dc(e: np.ndarray) -> float:
    el = e.sum(axis=1)
    er = e.sum(axis=0)
    mask = e > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.divide(e, np.outer(el, er), out=np.ones_like(e, dtype=np.float64), where=mask)
    logs = np.log(ratio, out=np.zeros_like(ratio), where=mask)
    return float(-(e * logs).sum())


class _State:
    """Mutable block assignment with block-level edge counts.

    Block slots may be empty (size 0); empty slots contribute nothing to the
    description length, so arrays never need compaction mid-run.
    """

    def __init__(
        self,
        adj_left: list[np.ndarray],
        adj_right: list[np.ndarray],
        bl: np.ndarray,
        br: np.ndarray,
        l_cap: int,
        r_cap: int,
        degree_corrected: bool,
    ):
        self.adj_left = adj_left
        self.adj_right = adj_right
        self.bl = bl
        self.br = br
        self.l_cap = l_cap
        self.r_cap = r_cap
        self.dc = degree_corrected
        self.n_left = len(adj_left)
        self.n_right = len(adj_right)
        self.e = np.zeros((l_cap, r_cap), dtype=np.int64)
        for i, neigh in enumerate(adj_left):
            if len(neigh):
                np.add.at(self.e, (bl[i], br[neigh]), 1)
        self.nl = np.bincount(bl, minlength=l_cap).astype(np.int64)
        self.nr = np.bincount(br, minlength=r_cap).astype(np.int64)
        self.n_edges = int(self.e.sum())
        self.lnc = _make_lnc(self.n_left, self.n_right, self.n_edges)

    @property
    def b_left(self) -> int:
        return int((self.nl > 0).sum())

    @property
    def b_right(self) -> int:
        return int((self.nr > 0).sum())

    def dl_parts(self) -> DescriptionLength:
        if self.dc:
            like = _likelihood_dc(self.e)
        else:
            like = float(self.lnc(np.outer(self.nl, self.nr), self.e).sum())
        edge_prior = float(_ln_comb(self.b_left * self.b_right + self.n_edges - 1, self.n_edges))
        part_prior = _partition_prior(self.n_left, self.nl) + _partition_prior(
            self.n_right, self.nr
        )
        return DescriptionLength(like + edge_prior + part_prior, like, edge_prior, part_prior)

    def dl(self) -> float:
        return self.dl_parts().total

    def copy_assignment(self) -> tuple[np.ndarray, np.ndarray]:
        return self.bl.copy(), self.br.copy()

    # -- side-symmetric views -------------------------------------------

    def _side(self, left: bool):
        if left:
            return self.bl, self.br, self.nl, self.nr, self.e, self.adj_left
        return self.br, self.bl, self.nr, self.nl, self.e.T, self.adj_right

    def _row_like(self, e_rows: np.ndarray, sizes_own: np.ndarray, sizes_opp: np.ndarray) -> np.ndarray:
        """Likelihood contribution of given block rows (one value per row)."""
        if not self.dc:
            return self.lnc(np.outer(sizes_own, sizes_opp), e_rows).sum(axis=1)
        el = e_rows.sum(axis=1, keepdims=True)
        er = self._opp_degrees_cache
        mask = e_rows > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.divide(
                e_rows, el * er[None, :], out=np.ones_like(e_rows, dtype=np.float64), where=mask
            )
        logs = np.log(ratio, out=np.zeros_like(ratio), where=mask)
        return -(e_rows * logs).sum(axis=1)

    def move_deltas(self, left: bool, node: int) -> tuple[np.ndarray, np.ndarray, int]:
        """Delta DL for moving one node to every block on its side.

        Returns (candidate block ids, deltas, current block).  The entry for
        the current block is 0 by construction.
        """
        b_own, b_opp, n_own, n_opp, e, adj = self._side(left)
        r = int(b_own[node])
        neigh = adj[node]
        d = np.bincount(b_opp[neigh], minlength=e.shape[1]).astype(np.int64)
        cands = np.flatnonzero(n_own > 0)
        if self.dc:
            self._opp_degrees_cache = e.sum(axis=0).astype(np.float64)

        # likelihood: rows r (loses node) and candidate rows (gain node)
        old_r = self._row_like(e[r][None, :], n_own[r : r + 1], n_opp)[0]
        new_r = self._row_like((e[r] - d)[None, :], n_own[r : r + 1] - 1, n_opp)[0]
        old_c = self._row_like(e[cands], n_own[cands], n_opp)
        new_c = self._row_like(e[cands] + d[None, :], n_own[cands] + 1, n_opp)

        deltas = (new_r - old_r) + (new_c - old_c)
        # moving within the same block is a no-op
        self_idx = np.where(cands == r)[0]
        if len(self_idx):
            deltas[self_idx[0]] = 0.0

        # partition prior: multinomial size terms
        n_r = n_own[r]
        size_term = (
            gammaln(n_r) - gammaln(n_r + 1) + gammaln(n_own[cands] + 2) - gammaln(n_own[cands] + 1)
        )
        size_term[cands == r] = 0.0
        deltas = deltas + size_term

        # block-count-dependent terms when the source block empties
        if n_r == 1:
            b_own_count = int((n_own > 0).sum())
            b_opp_count = int((n_opp > 0).sum())
            n_side = len(b_own)
            comp_delta = _ln_comb(n_side - 1, b_own_count - 2) - _ln_comb(
                n_side - 1, b_own_count - 1
            )
            ep_old = _ln_comb(b_own_count * b_opp_count + self.n_edges - 1, self.n_edges)
            ep_new = _ln_comb((b_own_count - 1) * b_opp_count + self.n_edges - 1, self.n_edges)
            bump = float(comp_delta + ep_new - ep_old)
            adj_mask = cands != r
            deltas[adj_mask] += bump
        return cands, deltas, r

    def apply_move(self, left: bool, node: int, target: int) -> None:
        b_own, b_opp, n_own, _, e, adj = self._side(left)
        r = int(b_own[node])
        if target == r:
            return
        neigh = adj[node]
        d = np.bincount(b_opp[neigh], minlength=e.shape[1]).astype(np.int64)
        e[r] -= d
        e[target] += d
        n_own[r] -= 1
        n_own[target] += 1
        b_own[node] = target

    def merge_delta(self, left: bool, r1: int, r2: int) -> float:
        _, _, n_own, n_opp, e, _ = self._side(left)
        if self.dc:
            self._opp_degrees_cache = e.sum(axis=0).astype(np.float64)
        old = self._row_like(e[[r1, r2]], n_own[[r1, r2]], n_opp).sum()
        new = self._row_like(
            (e[r1] + e[r2])[None, :], n_own[r1 : r1 + 1] + n_own[r2], n_opp
        )[0]
        size_term = (
            gammaln(n_own[r1] + n_own[r2] + 1) - gammaln(n_own[r1] + 1) - gammaln(n_own[r2] + 1)
        )
        b_own_count = int((n_own > 0).sum())
        b_opp_count = int((n_opp > 0).sum())
        n_side = len(self._side(left)[0])
        comp_delta = _ln_comb(n_side - 1, b_own_count - 2) - _ln_comb(n_side - 1, b_own_count - 1)
        ep_old = _ln_comb(b_own_count * b_opp_count + self.n_edges - 1, self.n_edges)
        ep_new = _ln_comb((b_own_count - 1) * b_opp_count + self.n_edges - 1, self.n_edges)
        return float(new - old + size_term + comp_delta + ep_new - ep_old)

    def apply_merge(self, left: bool, r1: int, r2: int) -> None:
        """Merge block r2 into r1."""
        b_own, _, n_own, _, e, _ = self._side(left)
        e[r1] += e[r2]
        e[r2] = 0
        n_own[r1] += n_own[r2]
        n_own[r2] = 0
        b_own[b_own == r2] = r1


def _internal_graph(graph: BipartiteGraph):
    tag_index = {t: i for i, t in enumerate(graph.tag_ids)}
    q_index = {q: j for j, q in enumerate(graph.question_ids)}
    adj_left: list[list[int]] = [[] for _ in graph.tag_ids]
    adj_right: list[list[int]] = [[] for _ in graph.question_ids]
    for t, q in graph.edges:
        adj_left[tag_index[t]].append(q_index[q])
        adj_right[q_index[q]].append(tag_index[t])
    return (
        [np.asarray(sorted(a), dtype=np.int64) for a in adj_left],
        [np.asarray(sorted(a), dtype=np.int64) for a in adj_right],
    )


def _state_from_partition(
    graph: BipartiteGraph, partition: Partition, degree_corrected: bool = False
) -> _State:
    tag_set = set(graph.tag_ids)
    q_set = set(graph.question_ids)
    for block in partition.tag_blocks:
        if block & q_set and block & tag_set != block:
            raise MixedLayerError(f"tag block {sorted(block)[:5]} contains question nodes")
    for block in partition.question_blocks:
        if block & tag_set and block & q_set != block:
            raise MixedLayerError(f"question block {sorted(block)[:5]} contains tag nodes")

    covered_t = set().union(*partition.tag_blocks) if partition.tag_blocks else set()
    covered_q = set().union(*partition.question_blocks) if partition.question_blocks else set()
    if covered_t != tag_set or covered_q != q_set:
        raise ValueError("partition does not cover the graph exactly")
    if sum(len(b) for b in partition.tag_blocks) != len(tag_set):
        raise ValueError("tag blocks overlap")
    if sum(len(b) for b in partition.question_blocks) != len(q_set):
        raise ValueError("question blocks overlap")

    tag_index = {t: i for i, t in enumerate(graph.tag_ids)}
    q_index = {q: j for j, q in enumerate(graph.question_ids)}
    bl = np.zeros(graph.n_tags, dtype=np.int64)
    br = np.zeros(graph.n_questions, dtype=np.int64)
    for r, block in enumerate(partition.tag_blocks):
        for t in block:
            bl[tag_index[t]] = r
    for s, block in enumerate(partition.question_blocks):
        for q in block:
            br[q_index[q]] = s
    adj_left, adj_right = _internal_graph(graph)
    return _State(
        adj_left,
        adj_right,
        bl,
        br,
        max(1, len(partition.tag_blocks)),
        max(1, len(partition.question_blocks)),
        degree_corrected,
    )


def description_length(
    graph: BipartiteGraph, partition: Partition, degree_corrected: bool = False
) -> DescriptionLength:
    """Description length of the graph under the partition, in nats."""
    state = _state_from_partition(graph, partition, degree_corrected)
    return state.dl_parts()


def _canonical_partition(graph: BipartiteGraph, bl: np.ndarray, br: np.ndarray) -> Partition:
    tag_groups: dict[int, list[int]] = {}
    for i, t in enumerate(graph.tag_ids):
        tag_groups.setdefault(int(bl[i]), []).append(t)
    q_groups: dict[int, list[int]] = {}
    for j, q in enumerate(graph.question_ids):
        q_groups.setdefault(int(br[j]), []).append(q)
    tag_blocks = tuple(
        frozenset(members) for members in sorted(tag_groups.values(), key=lambda m: min(m))
    )
    question_blocks = tuple(
        frozenset(members) for members in sorted(q_groups.values(), key=lambda m: min(m))
    )
    return Partition(tag_blocks, question_blocks)


def _sweep(state: _State, rng: np.random.Generator, max_sweeps: int, b_floor_left: int) -> None:
    """Greedy single-node moves, both sides, until converged or max_sweeps."""
    for _ in range(max_sweeps):
        improved = False
        for left in (True, False):
            n_nodes = state.n_left if left else state.n_right
            order = rng.permutation(n_nodes)
            n_own = state.nl if left else state.nr
            floor = b_floor_left if left else 1
            for node in order:
                b_own = state.bl if left else state.br
                r = int(b_own[node])
                # do not move the last member out if it would breach the floor
                if n_own[r] == 1 and int((n_own > 0).sum()) <= floor:
                    continue
                cands, deltas, r = state.move_deltas(left, int(node))
                best = int(np.argmin(deltas))
                if deltas[best] < -_EPS and int(cands[best]) != r:
                    state.apply_move(left, int(node), int(cands[best]))
                    improved = True
        if not improved:
            break


def _merge_round(
    state: _State, rng: np.random.Generator, left: bool, target_b: int, k_candidates: int
) -> None:
    """Greedy pairwise merges until the side has at most target_b blocks."""
    while True:
        n_own = state.nl if left else state.nr
        active = np.flatnonzero(n_own > 0)
        b = len(active)
        if b <= target_b:
            return
        proposals: list[tuple[float, int, int]] = []
        for r in active:
            others = active[active != r]
            if len(others) == 0:
                return
            k = min(k_candidates, len(others))
            picks = rng.choice(others, size=k, replace=False)
            for p in sorted(int(x) for x in picks):
                a, bb = (int(r), p) if int(r) < p else (p, int(r))
                proposals.append((state.merge_delta(left, a, bb), a, bb))
        proposals.sort(key=lambda t: (t[0], t[1], t[2]))
        consumed: set[int] = set()
        merged = 0
        for _, a, bb in proposals:
            if b - merged <= target_b:
                break
            if a in consumed or bb in consumed:
                continue
            state.apply_merge(left, a, bb)
            consumed.update((a, bb))
            merged += 1
        if merged == 0:
            # all sampled pairs consumed; force the single best remaining
            n_own = state.nl if left else state.nr
            active = np.flatnonzero(n_own > 0)
            best = min(
                (
                    (state.merge_delta(left, int(a), int(bb)), int(a), int(bb))
                    for ai, a in enumerate(active)
                    for bb in active[ai + 1 :]
                ),
                key=lambda t: (t[0], t[1], t[2]),
            )
            state.apply_merge(left, best[1], best[2])


def infer_partition(graph: BipartiteGraph, config: SbmConfig) -> Partition:
    """Lowest-DL partition found by agglomerative merges plus greedy sweeps."""
    if graph.n_tags == 0:
        raise ValueError("graph has no tag nodes")
    if config.b_min < 1:
        raise ValueError("b_min must be >= 1")

    b_max_default = max(config.b_min, math.ceil(2.0 * math.sqrt(max(graph.n_edges, 1))))
    b_max = config.b_max if config.b_max is not None else b_max_default
    adj_left, adj_right = _internal_graph(graph)

    master = np.random.SeedSequence(config.seed)
    streams = master.spawn(max(1, config.restarts))

    best_dl = math.inf
    best_assign: tuple[np.ndarray, np.ndarray] | None = None

    for stream in streams:
        rng = np.random.default_rng(stream)
        b_init_l = min(graph.n_tags, b_max)
        b_init_r = min(graph.n_questions, b_max)
        if b_init_l == graph.n_tags:
            bl = np.arange(graph.n_tags, dtype=np.int64)
        else:
            bl = rng.integers(0, b_init_l, size=graph.n_tags, dtype=np.int64)
        if b_init_r == graph.n_questions:
            br = np.arange(graph.n_questions, dtype=np.int64)
        else:
            br = rng.integers(0, b_init_r, size=graph.n_questions, dtype=np.int64)
        state = _State(
            adj_left, adj_right, bl, br, b_init_l, b_init_r, config.degree_corrected
        )

        current = state.dl()
        if current < best_dl:
            best_dl, best_assign = current, state.copy_assignment()

        cutoff = config.fine_merge_below

        def record() -> None:
            nonlocal best_dl, best_assign
            current = state.dl()
            if current < best_dl:
                best_dl, best_assign = current, state.copy_assignment()

        # coarse phase: halve both sides down to the cutoff
        floor_l = max(config.b_min, cutoff)
        floor_r = max(1, cutoff)
        while state.b_left > floor_l or state.b_right > floor_r:
            _sweep(state, rng, config.max_sweeps, config.b_min)
            record()
            if state.b_left > floor_l:
                target = max(floor_l, (state.b_left + 1) // 2)
                _merge_round(state, rng, True, target, config.merge_candidates)
            if state.b_right > floor_r:
                target = max(floor_r, (state.b_right + 1) // 2)
                _merge_round(state, rng, False, target, config.merge_candidates)
            record()

        # fine phase: one merge at a time, always on the side whose best
        # merge costs least, so every nearby block-count combination is seen
        _sweep(state, rng, config.max_sweeps, config.b_min)
        record()
        while state.b_left > config.b_min or state.b_right > 1:
            options: list[tuple[float, int, int, int, bool]] = []
            for left, floor in ((True, config.b_min), (False, 1)):
                n_own = state.nl if left else state.nr
                active = np.flatnonzero(n_own > 0)
                if len(active) <= floor:
                    continue
                best_pair = min(
                    (
                        (state.merge_delta(left, int(a), int(b)), int(a), int(b))
                        for ai, a in enumerate(active)
                        for b in active[ai + 1 :]
                    ),
                    key=lambda t: (t[0], t[1], t[2]),
                )
                options.append((*best_pair, 0 if left else 1, left))
            if not options:
                break
            _, a, b, _, left = min(options, key=lambda t: (t[0], t[3]))
            state.apply_merge(left, a, b)
            _sweep(state, rng, config.max_sweeps, config.b_min)
            record()

    assert best_assign is not None
    return _canonical_partition(graph, *best_assign)


# -- exhaustive enumeration oracle ------------------------------------------


def set_partitions(n: int) -> Iterator[list[int]]:
    """All partitions of range(n) as restricted-growth assignment vectors."""
    if n == 0:
        yield []
        return
    a = [0] * n
    b = [0] * n  # b[i] = max(a[:i+1])
    while True:
        yield list(a)
        # find rightmost position that can be incremented
        i = n - 1
        while i > 0 and a[i] == b[i - 1] + 1:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        b[i] = max(b[i - 1], a[i])
        for j in range(i + 1, n):
            a[j] = 0
            b[j] = b[i]


def oracle_enumerate(graph: BipartiteGraph, max_left_nodes: int) -> tuple[Partition, float]:
    """Globally DL-minimal partition by brute force.

    The question side is enumerated jointly when it has at most 6 nodes and
    held at a single coarse block otherwise.  Only meant for test-size graphs.
    """
    if not 1 <= max_left_nodes <= 10:
        raise ValueError("max_left_nodes must be between 1 and 10")
    if graph.n_tags > max_left_nodes:
        raise ValueError(f"too many tag nodes ({graph.n_tags} > {max_left_nodes})")

    n_l, n_r = graph.n_tags, graph.n_questions
    tag_index = {t: i for i, t in enumerate(graph.tag_ids)}
    q_index = {q: j for j, q in enumerate(graph.question_ids)}
    adj = np.zeros((n_l, n_r), dtype=np.int64)
    for t, q in graph.edges:
        adj[tag_index[t], q_index[q]] = 1
    e_total = graph.n_edges

    # ln C lookup tables; arguments never exceed n_l * n_r
    top = n_l * n_r + e_total + 2
    gl = gammaln(np.arange(top + 1, dtype=np.float64) + 1.0)

    def ln_comb_int(n: np.ndarray, k: np.ndarray) -> np.ndarray:
        return gl[n] - gl[k] - gl[n - k]

    ln_n_l = math.log(n_l)
    ln_n_r = math.log(max(n_r, 1))

    if n_r <= 6 and n_r > 0:
        right_parts = [np.asarray(p, dtype=np.int64) for p in set_partitions(n_r)]
    else:
        right_parts = [np.zeros(n_r, dtype=np.int64)]

    right_data = []
    for rp in right_parts:
        b_r = int(rp.max()) + 1 if n_r else 1
        m_r = np.zeros((n_r, b_r), dtype=np.int64)
        m_r[np.arange(n_r), rp] = 1
        sizes_r = m_r.sum(axis=0)
        ar = adj @ m_r  # n_l x b_r
        prior_r = (
            ln_n_r
            + float(ln_comb_int(np.int64(n_r - 1), np.int64(b_r - 1)))
            + float(gl[n_r] - gl[sizes_r].sum())
        )
        right_data.append((rp, b_r, sizes_r, ar, prior_r))

    best: tuple[float, list[int], np.ndarray] | None = None
    for lp in set_partitions(n_l):
        la = np.asarray(lp, dtype=np.int64)
        b_l = int(la.max()) + 1
        m_l = np.zeros((b_l, n_l), dtype=np.int64)
        m_l[la, np.arange(n_l)] = 1
        sizes_l = m_l.sum(axis=1)
        prior_l = (
            ln_n_l
            + float(ln_comb_int(np.int64(n_l - 1), np.int64(b_l - 1)))
            + float(gl[n_l] - gl[sizes_l].sum())
        )
        for rp, b_r, sizes_r, ar, prior_r in right_data:
            e = m_l @ ar  # b_l x b_r
            like = float(ln_comb_int(np.outer(sizes_l, sizes_r), e).sum())
            edge_prior = float(ln_comb_int(np.int64(b_l * b_r + e_total - 1), np.int64(e_total)))
            total = like + edge_prior + prior_l + prior_r
            if best is None or total < best[0]:
                best = (total, lp, rp)

    assert best is not None
    total, lp, rp = best
    bl = np.asarray(lp, dtype=np.int64)
    br = np.asarray(rp, dtype=np.int64)
    return _canonical_partition(graph, bl, br), total


# -- persistence -------------------------------------------------------------


def save_partition(
    path: Path | str, graph: BipartiteGraph, partition: Partition, dl_nats: float
) -> None:
    blocks = []
    block_id = 0
    for block in partition.tag_blocks:
        blocks.append({"block_id": block_id, "side": TAG_SIDE, "members": sorted(block)})
        block_id += 1
    for block in partition.question_blocks:
        blocks.append({"block_id": block_id, "side": QUESTION_SIDE, "members": sorted(block)})
        block_id += 1
    payload = {"blocks": blocks, "dl_nats": dl_nats}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_partition(path: Path | str) -> tuple[Partition, float]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    tag_blocks = []
    question_blocks = []
    for block in sorted(payload["blocks"], key=lambda b: b["block_id"]):
        members = frozenset(int(m) for m in block["members"])
        if block["side"] == TAG_SIDE:
            tag_blocks.append(members)
        else:
            question_blocks.append(members)
    return Partition(tuple(tag_blocks), tuple(question_blocks)), float(payload["dl_nats"])
