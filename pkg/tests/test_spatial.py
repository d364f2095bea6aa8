import numpy as np

from core.spatial import euclidean, knn_indices, nearest_neighbor


def brute_force_knn(points: np.ndarray, k: int) -> np.ndarray:
    out = []
    for i in range(len(points)):
        dist = euclidean(points, points[i])
        idx = np.arange(len(points))
        keep = idx != i
        order = np.lexsort((idx[keep], dist[keep]))
        out.append(idx[keep][order][:k])
    return np.array(out)


def test_ties_prefer_lower_index():
    pts = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0], [3.0, 0, 0]])
    assert knn_indices(pts, 2).tolist() == [[1, 2], [0, 2], [1, 3], [2, 1]]


def test_k_truncated_to_available_points():
    pts = np.random.default_rng(0).normal(size=(3, 3))
    assert knn_indices(pts, 5).shape == (3, 2)
    assert knn_indices(pts[:1], 5).shape == (1, 0)
    assert knn_indices(np.zeros((0, 3)), 5).shape == (0, 0)


def test_matches_brute_force_random():
    pts = np.random.default_rng(3).uniform(-10, 10, size=(200, 3))
    np.testing.assert_array_equal(knn_indices(pts, 8), brute_force_knn(pts, 8))


def test_matches_brute_force_on_grid_ties():
    g = np.arange(6, dtype=np.float64)
    pts = np.array([[x, y, 0.0] for x in g for y in g])
    np.testing.assert_array_equal(knn_indices(pts, 6), brute_force_knn(pts, 6))


def test_nearest_neighbor():
    ref = np.array([[0.0, 0, 0], [5.0, 0, 0]])
    dist, idx = nearest_neighbor(np.array([[1.0, 0, 0], [4.5, 0, 0]]), ref)
    assert idx.tolist() == [0, 1]
    np.testing.assert_allclose(dist, [1.0, 0.5])


def test_nearest_neighbor_empty_reference():
    dist, idx = nearest_neighbor(np.ones((2, 3)), np.zeros((0, 3)))
    assert np.all(np.isinf(dist))
    assert idx.tolist() == [-1, -1]
