import numpy as np
import pytest

from core.cluster import (
    ClusterConfig,
    SegmentationResult,
    correlation_cluster,
    edge_weights,
    finalize,
    greedy_additive_contraction,
    objective,
    segment,
    symmetrize,
)
from core.errors import ConfigError


def test_symmetrize_averages_both_directions():
    edges = np.array([[0, 1], [1, 0], [1, 2], [2, 2]])
    pairs, sbar = symmetrize(edges, np.array([0.8, 0.6, 0.2, 0.9]))
    assert pairs.tolist() == [[0, 1], [1, 2]]
    np.testing.assert_allclose(sbar, [0.7, 0.2])


def test_edge_weights_clamped():
    np.testing.assert_allclose(edge_weights(np.array([0.5, 1.0, 0.0])), [0.0, 13.8, -13.8])


def test_contraction_stops_on_negative_merge():
    pairs = np.array([[0, 1], [1, 2], [0, 2]])
    partition = greedy_additive_contraction(3, pairs, np.array([2.0, 1.0, -5.0]))
    assert partition.tolist() == [0, 0, 2]


def test_contraction_merges_positive_chain():
    pairs = np.array([[0, 1], [1, 2], [2, 3]])
    assert greedy_additive_contraction(4, pairs, np.ones(3)).tolist() == [0, 0, 0, 0]


def test_contraction_ties_take_smallest_pair():
    pairs = np.array([[0, 1], [1, 2], [0, 2]])
    partition = greedy_additive_contraction(3, pairs, np.array([1.0, 1.0, -1.5]))
    assert partition.tolist() == [0, 0, 2]


def test_objective():
    pairs = np.array([[0, 1], [1, 2], [0, 2]])
    weights = np.array([2.0, 1.0, -5.0])
    assert objective(pairs, weights, np.array([0, 0, 2])) == pytest.approx(2.0)
    assert objective(pairs, weights, np.array([0, 0, 0])) == pytest.approx(-2.0)


def test_prune_then_connected_components():
    pairs = np.array([[0, 1], [1, 2], [3, 4]])
    cfg = ClusterConfig(mode="prune-then-cc")
    partition = correlation_cluster(5, pairs, np.array([0.9, 0.4, 0.6]), cfg)
    assert partition.tolist() == [0, 0, 2, 3, 3]


def test_finalize_drops_singletons():
    result = finalize(np.array([0, 0, 2, 3, 3, 3]))
    assert [c.tolist() for c in result.clusters] == [[0, 1], [3, 4, 5]]
    assert result.unassigned.tolist() == [2]
    assert result.labels(6).tolist() == [0, 0, -1, 1, 1, 1]


def test_segment_two_groups():
    edges = np.array([[0, 1], [1, 0], [1, 2], [3, 4], [2, 3], [4, 5]])
    scores = np.array([0.9, 0.95, 0.8, 0.9, 0.1, 0.02])
    result = segment(6, edges, scores)
    assert [c.tolist() for c in result.clusters] == [[0, 1, 2], [3, 4]]
    assert result.unassigned.tolist() == [5]
    assert result.scores[0] == pytest.approx((0.925 + 0.8) / 2)
    assert result.scores[1] == pytest.approx(0.9)


def test_segment_degenerate_inputs():
    empty = segment(0, np.zeros((0, 2)), np.zeros(0))
    assert empty.clusters == [] and len(empty.unassigned) == 0
    lonely = segment(3, np.zeros((0, 2)), np.zeros(0))
    assert lonely.clusters == []
    assert lonely.unassigned.tolist() == [0, 1, 2]
    assert isinstance(lonely, SegmentationResult)


def test_cluster_config_rejects():
    with pytest.raises(ConfigError):
        ClusterConfig(min_cluster_size=1)
    with pytest.raises(ConfigError):
        ClusterConfig(mode="spectral")
    with pytest.raises(ConfigError):
        ClusterConfig(threshold=1.0)


def set_partitions(n: int):
    """Toutes les partitions de n noeuds (chaines a croissance restreinte)"""
    labels = [0] * n

    def grow(i: int, top: int):
        if i == n:
            yield np.array(labels)
            return
        for c in range(top + 2):
            labels[i] = c
            yield from grow(i + 1, max(top, c))

    if n == 0:
        yield np.zeros(0, dtype=np.int64)
        return
    yield from grow(1, 0)


def best_objective(n: int, pairs: np.ndarray, weights: np.ndarray) -> float:
    return max(objective(pairs, weights, p) for p in set_partitions(n))


def two_cliques(cross):
    pairs = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]
    scores = [0.9] * len(pairs)
    for (a, b), s in cross:
        pairs.append((a, b))
        scores.append(s)
    return np.array(pairs), np.array(scores)


def test_complementary_scores_cancel_exactly():
    s = np.array([0.5, 0.6, 0.73, 0.9, 0.999])
    np.testing.assert_array_equal(edge_weights(s) + edge_weights(1.0 - s), np.zeros(len(s)))
    assert edge_weights(np.array([0.9]))[0] + edge_weights(np.array([0.1]))[0] == 0.0


def test_zero_gain_merge_is_refused():
    pairs, sbar = two_cliques([((2, 3), 0.9), ((1, 4), 0.1), ((0, 5), 0.1)])
    partition = correlation_cluster(6, pairs, sbar)
    # {0..3} puis {4,5}: le gain de la fusion restante est nul
    assert partition.tolist() == [0, 0, 0, 0, 4, 4]
    w = edge_weights(sbar)
    assert objective(pairs, w, partition) == pytest.approx(5 * w[0])


def test_outlier_cross_edge_keeps_cliques_apart():
    pairs, sbar = two_cliques([((2, 3), 0.9), ((1, 3), 0.1), ((0, 3), 0.1)])
    partition = correlation_cluster(6, pairs, sbar)
    assert partition.tolist() == [0, 0, 0, 3, 3, 3]
    w = edge_weights(sbar)
    assert objective(pairs, w, partition) == pytest.approx(best_objective(6, pairs, w))


def test_set_partitions_count():
    # nombres de Bell
    assert [sum(1 for _ in set_partitions(n)) for n in range(1, 7)] == [1, 2, 5, 15, 52, 203]


def random_graph(rng: np.random.Generator, n: int, density: float = 0.6) -> np.ndarray:
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < density]
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


@pytest.mark.parametrize("seed", range(40))
def test_greedy_reaches_optimum_on_consistent_scores(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    gt = rng.integers(0, 3, size=n)
    pairs = random_graph(rng, n)
    same = gt[pairs[:, 0]] == gt[pairs[:, 1]]
    sbar = np.where(same, rng.uniform(0.55, 0.99, len(pairs)), rng.uniform(0.01, 0.45, len(pairs)))
    w = edge_weights(sbar)
    greedy = correlation_cluster(n, pairs, sbar)
    assert objective(pairs, w, greedy) == pytest.approx(best_objective(n, pairs, w), abs=1e-9)


@pytest.mark.parametrize("seed", range(40))
def test_greedy_never_below_pruned_components(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(2, 9))
    pairs = random_graph(rng, n, density=0.7)
    sbar = rng.uniform(0.02, 0.98, len(pairs))
    w = edge_weights(sbar)
    greedy = correlation_cluster(n, pairs, sbar)
    pruned = correlation_cluster(n, pairs, sbar, ClusterConfig(mode="prune-then-cc"))
    assert objective(pairs, w, greedy) >= objective(pairs, w, pruned) - 1e-6


def test_contraction_on_long_chain():
    n = 5000
    pairs = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    weights = np.where(np.arange(n - 1) % 100 == 99, -1.0, 1.0)
    partition = greedy_additive_contraction(n, pairs, weights)
    assert np.array_equal(partition, (np.arange(n) // 100) * 100)
