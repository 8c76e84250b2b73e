import math

import numpy as np
import pytest

from taskspace import blockmodel as bm


def planted_graph(n_tags, n_q, n_blocks, seed, p_in=0.5, p_out=0.02, base=1000):
    """Bipartite graph with aligned tag/question blocks."""
    rng = np.random.default_rng(seed)
    tags = list(range(n_tags))
    qs = list(range(base, base + n_q))
    bt = {t: t * n_blocks // n_tags for t in tags}
    bq = {q: (q - base) * n_blocks // n_q for q in qs}
    edges = [
        (t, q)
        for t in tags
        for q in qs
        if rng.random() < (p_in if bt[t] == bq[q] else p_out)
    ]
    plant = {frozenset(t for t in tags if bt[t] == b) for b in range(n_blocks)}
    return bm.BipartiteGraph.from_edges(tags, qs, edges), plant


def random_graph(n_tags, n_q, density, seed):
    rng = np.random.default_rng(seed)
    tags = list(range(n_tags))
    qs = list(range(100, 100 + n_q))
    edges = [(t, q) for t in tags for q in qs if rng.random() < density]
    if not edges:
        edges = [(tags[0], qs[0])]
    return bm.BipartiteGraph.from_edges(tags, qs, edges)


K22 = bm.BipartiteGraph.from_edges([0, 1], [10, 11], [(0, 10), (0, 11), (1, 10), (1, 11)])
K22_MERGED = bm.Partition((frozenset({0, 1}),), (frozenset({10, 11}),))


class TestDescriptionLength:
    def test_k22_hand_value(self):
        # likelihood ln C(4,4)=0; edge prior ln C(4,4)=0; each side prior ln 2
        dl = bm.description_length(K22, K22_MERGED)
        assert dl.likelihood_term == 0.0
        assert dl.edge_matrix_prior == 0.0
        assert dl.partition_prior == pytest.approx(2 * math.log(2), abs=1e-12)
        assert dl.total == pytest.approx(2 * math.log(2), abs=1e-12)

    def test_total_is_sum_of_parts(self):
        g = random_graph(5, 6, 0.4, 0)
        part, _ = bm.oracle_enumerate(g, 8)
        dl = bm.description_length(g, part)
        assert dl.total == pytest.approx(
            dl.likelihood_term + dl.edge_matrix_prior + dl.partition_prior, abs=1e-12
        )

    def test_empty_graph_zero_likelihood(self):
        g = bm.BipartiteGraph.from_edges([0, 1], [10, 11], [])
        dl = bm.description_length(g, K22_MERGED)
        assert dl.likelihood_term == 0.0

    def test_singletons_never_beat_enumerated_minimum(self):
        for seed in range(5):
            g = random_graph(4, 4, 0.5, seed)
            single = bm.Partition(
                tuple(frozenset([t]) for t in g.tag_ids),
                tuple(frozenset([q]) for q in g.question_ids),
            )
            _, dl_min = bm.oracle_enumerate(g, 8)
            assert bm.description_length(g, single).total >= dl_min - 1e-9

    def test_relabeling_invariance(self):
        g = random_graph(6, 5, 0.4, 3)
        part, _ = bm.oracle_enumerate(g, 8)
        flipped = bm.Partition(part.tag_blocks[::-1], part.question_blocks[::-1])
        assert bm.description_length(g, flipped).total == pytest.approx(
            bm.description_length(g, part).total, abs=1e-12
        )

    def test_mixed_layer_rejected(self):
        mixed = bm.Partition((frozenset({0, 10}), frozenset({1})), (frozenset({11}),))
        with pytest.raises(bm.MixedLayerError):
            bm.description_length(K22, mixed)

    def test_from_assignment_rejects_mixing(self):
        with pytest.raises(bm.MixedLayerError):
            bm.Partition.from_assignment(
                K22, {("tag", 0): 0, ("tag", 1): 1, ("question", 10): 0, ("question", 11): 1}
            )


class TestInference:
    def test_planted_two_blocks_recovered(self):
        g, plant = planted_graph(20, 100, 2, seed=1)
        part = bm.infer_partition(g, bm.SbmConfig(seed=1))
        assert set(part.tag_blocks) == plant

    def test_single_tag_graph(self):
        g = bm.BipartiteGraph.from_edges([5], [10, 11], [(5, 10), (5, 11)])
        part = bm.infer_partition(g, bm.SbmConfig(seed=0))
        assert part.tag_blocks == (frozenset({5}),)

    def test_toy_graph_matches_enumeration(self):
        # two dense tag groups; global optimum has 2 tag blocks, so it lies
        # within the B<=3 slice the enumeration covers anyway
        edges = [(t, q) for t in (0, 1, 2) for q in (10, 11)] + [
            (t, q) for t in (3, 4, 5) for q in (12, 13)
        ]
        g = bm.BipartiteGraph.from_edges(range(6), range(10, 14), edges)
        part = bm.infer_partition(g, bm.SbmConfig(seed=0, restarts=4))
        oracle_part, dl_min = bm.oracle_enumerate(g, 6)
        assert bm.description_length(g, part).total == pytest.approx(dl_min, abs=1e-9)
        assert oracle_part.n_tag_blocks <= 3

    def test_final_dl_never_above_initial(self):
        for seed in range(3):
            g = random_graph(10, 20, 0.3, seed)
            singletons = bm.Partition(
                tuple(frozenset([t]) for t in g.tag_ids),
                tuple(frozenset([q]) for q in g.question_ids),
            )
            part = bm.infer_partition(g, bm.SbmConfig(seed=seed))
            assert (
                bm.description_length(g, part).total
                <= bm.description_length(g, singletons).total + 1e-9
            )

    def test_bit_reproducible(self):
        g = random_graph(8, 15, 0.3, 4)
        cfg = bm.SbmConfig(seed=11)
        assert bm.infer_partition(g, cfg) == bm.infer_partition(g, cfg)

    def test_partition_is_valid(self):
        g = random_graph(9, 12, 0.35, 5)
        part = bm.infer_partition(g, bm.SbmConfig(seed=2))
        assert set().union(*part.tag_blocks) == set(g.tag_ids)
        assert set().union(*part.question_blocks) == set(g.question_ids)
        assert sum(len(b) for b in part.tag_blocks) == g.n_tags

    def test_degree_corrected_monotone_and_deterministic(self):
        g = random_graph(8, 12, 0.3, 5)
        cfg = bm.SbmConfig(seed=2, degree_corrected=True)
        p1 = bm.infer_partition(g, cfg)
        p2 = bm.infer_partition(g, cfg)
        assert p1 == p2
        singletons = bm.Partition(
            tuple(frozenset([t]) for t in g.tag_ids),
            tuple(frozenset([q]) for q in g.question_ids),
        )
        assert (
            bm.description_length(g, p1, degree_corrected=True).total
            <= bm.description_length(g, singletons, degree_corrected=True).total + 1e-9
        )


class TestOracle:
    def test_identical_neighborhood_tags_share_block(self):
        part, _ = bm.oracle_enumerate(K22, 8)
        assert part.tag_blocks == (frozenset({0, 1}),)

    def test_disjoint_dense_groups_split(self):
        # with enough edge evidence the split beats the merged one-block state
        edges = [(t, q) for t in (0, 1) for q in (10, 11, 12)] + [
            (t, q) for t in (2, 3) for q in (13, 14, 15)
        ]
        g = bm.BipartiteGraph.from_edges(range(4), range(10, 16), edges)
        part, _ = bm.oracle_enumerate(g, 8)
        assert set(part.tag_blocks) == {frozenset({0, 1}), frozenset({2, 3})}

    def test_single_tag_trivial(self):
        g = bm.BipartiteGraph.from_edges([0], [10], [(0, 10)])
        part, _ = bm.oracle_enumerate(g, 8)
        assert part.tag_blocks == (frozenset({0}),)

    def test_too_many_tags_rejected(self):
        g = random_graph(9, 4, 0.5, 0)
        with pytest.raises(ValueError):
            bm.oracle_enumerate(g, 8)
        with pytest.raises(ValueError):
            bm.oracle_enumerate(g, 11)

    def test_infer_matches_oracle_on_small_graphs(self):
        for seed in range(8):
            g = random_graph(6, 5, 0.4, 100 + seed)
            _, dl_min = bm.oracle_enumerate(g, 8)
            part = bm.infer_partition(g, bm.SbmConfig(seed=seed, restarts=4))
            assert bm.description_length(g, part).total == pytest.approx(dl_min, abs=1e-9)


def test_set_partitions_counts():
    # Bell numbers 1, 1, 2, 5, 15, 52, 203
    for n, bell in [(0, 1), (1, 1), (2, 2), (3, 5), (4, 15), (5, 52), (6, 203)]:
        assert sum(1 for _ in bm.set_partitions(n)) == bell


def test_partition_json_roundtrip(tmp_path):
    g = random_graph(5, 6, 0.4, 9)
    part = bm.infer_partition(g, bm.SbmConfig(seed=1))
    dl = bm.description_length(g, part).total
    path = tmp_path / "partition.json"
    bm.save_partition(path, g, part, dl)
    loaded, dl_loaded = bm.load_partition(path)
    assert loaded == part
    assert dl_loaded == dl
