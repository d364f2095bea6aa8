"""
Cluster - Clustering de correlation des scores d'aretes
========================================================

Symetrise les scores dirigees, puis partitionne par contraction gloutonne
des aretes (poids = logit du score). Les singletons sont ecartes.

Modes:
- signed: toutes les aretes, poids signes
- prune-then-cc: aretes sous le seuil retirees, puis composantes connexes

Author: Motion Cluster System
Date: 2025-11-24
"""

import heapq
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import logit

from core.errors import ConfigError

logger = logging.getLogger(__name__)

CLUSTER_MODES = ("signed", "prune-then-cc")
# un gain cumule sous ce seuil ne justifie pas une fusion
MERGE_TOL = 1e-9


@dataclass(frozen=True)
class ClusterConfig:
    mode: str = "signed"
    threshold: float = 0.5
    logit_clamp: float = 13.8
    min_cluster_size: int = 2

    def __post_init__(self):
        if self.mode not in CLUSTER_MODES:
            raise ConfigError(f"cluster.mode must be one of {', '.join(CLUSTER_MODES)}")
        if not 0 < self.threshold < 1:
            raise ConfigError("cluster.threshold must be in (0, 1)")
        if not self.logit_clamp > 0:
            raise ConfigError("cluster.logit_clamp must be > 0")
        if self.min_cluster_size < 2:
            raise ConfigError("cluster.min_cluster_size must be >= 2")


@dataclass
class SegmentationResult:
    """
    Instances segmentees

    clusters: indices de points par cluster (tries, taille >= 2)
    unassigned: points ecartes (singletons, bruit)
    scores: score moyen symetrise a l'interieur de chaque cluster
    """

    clusters: List[np.ndarray] = field(default_factory=list)
    unassigned: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    scores: List[float] = field(default_factory=list)

    def labels(self, num_points: int) -> np.ndarray:
        """Etiquette par point (-1 = non assigne)"""
        out = np.full(num_points, -1, dtype=np.int64)
        for c, members in enumerate(self.clusters):
            out[members] = c
        return out


def symmetrize(edge_index: np.ndarray, scores: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Paires non orientees (i < j) et moyenne des scores disponibles

    Returns:
        (paires (P,2) triees, scores moyens (P,))
    """
    edge_index = np.asarray(edge_index, dtype=np.int64).reshape(-1, 2)
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if len(edge_index) == 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0)
    lo = np.minimum(edge_index[:, 0], edge_index[:, 1])
    hi = np.maximum(edge_index[:, 0], edge_index[:, 1])
    keep = lo != hi
    lo, hi, scores = lo[keep], hi[keep], scores[keep]
    pairs, inverse = np.unique(np.column_stack([lo, hi]), axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    sums = np.bincount(inverse, weights=scores, minlength=len(pairs))
    counts = np.bincount(inverse, minlength=len(pairs))
    return pairs.astype(np.int64), sums / counts


def edge_weights(sbar: np.ndarray, clamp: float = 13.8) -> np.ndarray:
    """
    Poids signes logit(s), bornes a +/- clamp

    Calcules sur max(s, 1-s) puis signes: w(1-s) == -w(s) exactement, donc
    des scores complementaires s'annulent sans residu flottant.
    """
    s = np.asarray(sbar, dtype=np.float64)
    with np.errstate(divide="ignore"):
        magnitude = np.clip(logit(np.maximum(s, 1.0 - s)), 0.0, clamp)
    return np.where(s >= 0.5, magnitude, -magnitude)


def _find(parent: List[int], i: int) -> int:
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def greedy_additive_contraction(num_nodes: int, pairs: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    Contraction gloutonne: fusionne la paire de clusters de plus grand poids
    cumule tant qu'il depasse MERGE_TOL. Egalites: plus petite paire
    (min id, max id). Un cluster porte l'id de son plus petit noeud.

    Returns:
        (N,) id de cluster par noeud
    """
    adjacency: Dict[int, Dict[int, float]] = {i: {} for i in range(num_nodes)}
    for (a, b), w in zip(pairs.tolist(), np.asarray(weights, dtype=np.float64).tolist()):
        adjacency[a][b] = adjacency[a].get(b, 0.0) + w
        adjacency[b][a] = adjacency[b].get(a, 0.0) + w

    heap = [(-w, a, b) for a, nbrs in adjacency.items() for b, w in nbrs.items() if a < b and w > MERGE_TOL]
    heapq.heapify(heap)
    parent = list(range(num_nodes))

    while heap:
        neg_w, a, b = heapq.heappop(heap)
        if a not in adjacency or b not in adjacency or adjacency[a].get(b) != -neg_w:
            continue
        # b rejoint a (a < b)
        merged = adjacency.pop(b)
        del adjacency[a][b]
        merged.pop(a, None)
        for c, w in merged.items():
            del adjacency[c][b]
            total = adjacency[a].get(c, 0.0) + w
            adjacency[a][c] = total
            adjacency[c][a] = total
        for c, total in adjacency[a].items():
            if c in merged and total > MERGE_TOL:
                heapq.heappush(heap, (-total, min(a, c), max(a, c)))
        parent[b] = a
    return np.array([_find(parent, i) for i in range(num_nodes)], dtype=np.int64)


def correlation_cluster(num_nodes: int, pairs: np.ndarray, sbar: np.ndarray, cfg: ClusterConfig = ClusterConfig()) -> np.ndarray:
    """
    Partition des noeuds a partir des scores symetrises

    Args:
        num_nodes: Nombre de noeuds
        pairs: (P,2) paires i < j
        sbar: (P,) scores dans (0,1)
        cfg: Mode et seuil

    Returns:
        (N,) id de cluster par noeud
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    sbar = np.asarray(sbar, dtype=np.float64).ravel()
    if num_nodes == 0:
        return np.zeros(0, dtype=np.int64)
    if cfg.mode == "prune-then-cc":
        keep = sbar >= cfg.threshold
        kept = pairs[keep]
        graph = coo_matrix(
            (np.ones(len(kept)), (kept[:, 0], kept[:, 1])), shape=(num_nodes, num_nodes)
        )
        _, comp = connected_components(graph, directed=False)
        # id = plus petit noeud de la composante
        first = np.full(comp.max() + 1, num_nodes, dtype=np.int64)
        np.minimum.at(first, comp, np.arange(num_nodes))
        return first[comp]
    return greedy_additive_contraction(num_nodes, pairs, edge_weights(sbar, cfg.logit_clamp))


def objective(pairs: np.ndarray, weights: np.ndarray, partition: np.ndarray) -> float:
    """Somme des poids des paires internes a un cluster"""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return 0.0
    within = partition[pairs[:, 0]] == partition[pairs[:, 1]]
    return float(np.sum(np.asarray(weights)[within]))


def finalize(partition: np.ndarray, min_size: int = 2) -> SegmentationResult:
    """Ecarte les clusters de taille < min_size"""
    partition = np.asarray(partition, dtype=np.int64).ravel()
    result = SegmentationResult()
    if len(partition) == 0:
        return result
    unassigned = []
    for cid in np.unique(partition):
        members = np.flatnonzero(partition == cid)
        if len(members) >= min_size:
            result.clusters.append(members)
        else:
            unassigned.extend(members.tolist())
    result.clusters.sort(key=lambda m: int(m[0]))
    result.unassigned = np.array(sorted(unassigned), dtype=np.int64)
    return result


def cluster_scores(clusters: List[np.ndarray], pairs: np.ndarray, sbar: np.ndarray, num_nodes: int) -> List[float]:
    """Score moyen des paires internes de chaque cluster (0 si aucune paire)"""
    labels = np.full(num_nodes, -1, dtype=np.int64)
    for c, members in enumerate(clusters):
        labels[members] = c
    out = []
    if len(pairs):
        la, lb = labels[pairs[:, 0]], labels[pairs[:, 1]]
    for c in range(len(clusters)):
        if len(pairs) == 0:
            out.append(0.0)
            continue
        inside = (la == c) & (lb == c)
        out.append(float(sbar[inside].mean()) if inside.any() else 0.0)
    return out


def segment(num_nodes: int, edge_index: np.ndarray, scores: np.ndarray, cfg: ClusterConfig = ClusterConfig()) -> SegmentationResult:
    """Symetrise, partitionne et finalise"""
    pairs, sbar = symmetrize(edge_index, scores)
    partition = correlation_cluster(num_nodes, pairs, sbar, cfg)
    result = finalize(partition, cfg.min_cluster_size)
    result.scores = cluster_scores(result.clusters, pairs, sbar, num_nodes)
    logger.debug("[Cluster] %d nodes -> %d clusters, %d unassigned",
                 num_nodes, len(result.clusters), len(result.unassigned))
    return result
