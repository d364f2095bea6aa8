"""
Spatial - Requetes de voisinage exactes
========================================

kNN exact (egalites departagees par l'index le plus bas) et plus proche
voisin entre deux nuages, sur cKDTree.

Author: Motion Cluster System
Date: 2025-11-24
"""

from typing import Tuple

import numpy as np
from scipy.spatial import cKDTree

TIE_RTOL = 1e-9
TIE_ATOL = 1e-12


def euclidean(points: np.ndarray, origin: np.ndarray) -> np.ndarray:
    """Distances euclidiennes recalculees en float64 (meme formule partout)"""
    return np.sqrt(np.sum((points - origin) ** 2, axis=-1))


def _exact_row(tree: cKDTree, pts: np.ndarray, i: int, k: int, radius: float) -> np.ndarray:
    cand = np.asarray(tree.query_ball_point(pts[i], radius), dtype=np.int64)
    cand = cand[cand != i]
    dist = euclidean(pts[cand], pts[i])
    order = np.lexsort((cand, dist))
    return cand[order][:k]


def knn_indices(points: np.ndarray, k: int) -> np.ndarray:
    """
    k plus proches voisins exacts de chaque point (lui-meme exclu)

    Args:
        points: Tableau (M, D)
        k: Nombre de voisins voulus (tronque a M-1)

    Returns:
        Tableau (M, min(k, M-1)) d'indices, tries par (distance, index)
    """
    pts = np.asarray(points, dtype=np.float64)
    m = len(pts)
    kk = min(int(k), m - 1)
    if kk <= 0:
        return np.zeros((m, 0), dtype=np.int64)
    pts = pts.reshape(m, -1)

    tree = cKDTree(pts)
    q = min(kk + 2, m)
    _, idx = tree.query(pts, k=q)
    idx = np.asarray(idx, dtype=np.int64).reshape(m, q)

    dist = euclidean(pts[idx], pts[:, None, :])
    dist[idx == np.arange(m)[:, None]] = np.inf
    order = np.lexsort((idx, dist), axis=-1)
    idx_sorted = np.take_along_axis(idx, order, axis=1)
    dist_sorted = np.take_along_axis(dist, order, axis=1)

    out = idx_sorted[:, :kk].copy()
    if q == m:
        return out

    # candidats insuffisants si le dernier voisin retourne est a egalite avec le k-ieme
    boundary = dist_sorted[:, kk - 1]
    radius = boundary * (1.0 + TIE_RTOL) + TIE_ATOL
    farthest = np.max(np.where(np.isinf(dist), -np.inf, dist), axis=1)
    for i in np.flatnonzero(farthest <= radius):
        out[i] = _exact_row(tree, pts, int(i), kk, float(radius[i]))
    return out


def nearest_neighbor(query: np.ndarray, reference: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Plus proche voisin de chaque point de `query` dans `reference`

    Returns:
        (distances, indices); distances = +inf et indices = -1 si reference vide
    """
    query = np.asarray(query, dtype=np.float64).reshape(-1, 3)
    reference = np.asarray(reference, dtype=np.float64).reshape(-1, 3)
    if len(reference) == 0:
        return np.full(len(query), np.inf), np.full(len(query), -1, dtype=np.int64)
    if len(query) == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    _, idx = cKDTree(reference).query(query, k=1)
    idx = np.asarray(idx, dtype=np.int64)
    return euclidean(reference[idx], query), idx
