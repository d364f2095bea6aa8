"""
Graph Builder - Graphe kNN avec attributs de noeuds et d'aretes
================================================================

Construit le graphe de mouvement d'une frame filtree: aretes kNN dirigees,
attributs de noeuds (position + statistiques de vitesse), attributs d'aretes
(differences), etiquettes d'aretes verite terrain.

Features:
- kNN en position, en vitesse, ou en position avec coupure en vitesse
- Variantes d'attributs: position / velocity / both / scene_flow
- Statistiques de vitesse par axe (9) ou en norme (3)
- Union disjointe de graphes pour l'entrainement par lots

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence as Seq

import numpy as np

from core.boxes import BoxConfig, boxes_from_segmentation
from core.cluster import ClusterConfig, segment
from core.errors import ConfigError, ShapeError
from core.evaluation import EvalConfig, MetricsReport, match_and_score
from core.preprocess import FilteredFrame
from core.scene import FRAME_DT, moving_instance_ids
from core.spatial import knn_indices

logger = logging.getLogger(__name__)

KNN_SPACES = ("position", "velocity", "position_velocity_cut")
NODE_VARIANTS = ("velocity", "position", "both", "scene_flow")
EDGE_VARIANTS = ("velocity", "position", "both")
VELOCITY_STATS = ("axis", "magnitude")


@dataclass(frozen=True)
class FeatureConfig:
    """Construction du graphe et choix des attributs"""

    knn_space: str = "position"
    k: int = 16
    node_variant: str = "both"
    edge_variant: str = "position"
    velocity_stats: str = "axis"
    velocity_cut: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("graph.k must be >= 1")
        for key, allowed in (("knn_space", KNN_SPACES), ("node_variant", NODE_VARIANTS),
                             ("edge_variant", EDGE_VARIANTS), ("velocity_stats", VELOCITY_STATS)):
            if getattr(self, key) not in allowed:
                raise ConfigError(f"graph.{key} must be one of {', '.join(allowed)}")
        if not self.velocity_cut > 0:
            raise ConfigError("graph.velocity_cut must be > 0")

    @property
    def stats_dim(self) -> int:
        if self.node_variant == "scene_flow":
            return 3
        return 9 if self.velocity_stats == "axis" else 3

    @property
    def node_dim(self) -> int:
        return {
            "position": 3,
            "velocity": self.stats_dim,
            "both": 3 + self.stats_dim,
            "scene_flow": 6,
        }[self.node_variant]

    @property
    def edge_dim(self) -> int:
        return {"position": 3, "velocity": self.stats_dim, "both": 3 + self.stats_dim}[self.edge_variant]

    def echo(self) -> Dict[str, str]:
        return {
            "knn_space": self.knn_space,
            "k": str(self.k),
            "node_variant": self.node_variant,
            "edge_variant": self.edge_variant,
            "velocity_stats": self.velocity_stats,
            "velocity_cut": repr(self.velocity_cut),
        }

    @classmethod
    def from_echo(cls, values: Dict[str, str]) -> "FeatureConfig":
        return cls(
            knn_space=values.get("knn_space", "position"),
            k=int(values.get("k", 16)),
            node_variant=values.get("node_variant", "both"),
            edge_variant=values.get("edge_variant", "position"),
            velocity_stats=values.get("velocity_stats", "axis"),
            velocity_cut=float(values.get("velocity_cut", 1.0)),
        )


@dataclass(frozen=True, eq=False)
class MotionGraph:
    """
    Graphe de mouvement d'une frame

    edge_index: (E,2) aretes dirigees (i, j), sans boucle ni doublon
    edge_labels: (E,) vrai si i et j appartiennent au meme objet mobile
    """

    node_feats: np.ndarray
    edge_index: np.ndarray
    edge_feats: np.ndarray
    edge_labels: np.ndarray
    node_positions: np.ndarray
    node_gt_ids: np.ndarray
    frame_index: int = 0

    @property
    def num_nodes(self) -> int:
        return len(self.node_feats)

    @property
    def num_edges(self) -> int:
        return len(self.edge_index)


def velocities(trajectories: np.ndarray) -> np.ndarray:
    """Vitesses par pas (M,24,3) en m/s"""
    traj = np.asarray(trajectories, dtype=np.float64)
    return np.diff(traj, axis=1) / FRAME_DT


def velocity_stats(trajectories: np.ndarray, kind: str = "axis") -> np.ndarray:
    """
    Statistiques de vitesse d'une trajectoire

    Args:
        trajectories: (M,25,3)
        kind: "axis" -> [moyenne(3), min(3), max(3)]; "magnitude" -> [moyenne, min, max] de |v|

    Returns:
        (M,9) ou (M,3)
    """
    v = velocities(trajectories)
    if len(v) == 0:
        return np.zeros((0, 9 if kind == "axis" else 3))
    if kind == "magnitude":
        speed = np.sqrt(np.sum(v ** 2, axis=2))
        return np.column_stack([speed.mean(axis=1), speed.min(axis=1), speed.max(axis=1)])
    return np.concatenate([v.mean(axis=1), v.min(axis=1), v.max(axis=1)], axis=1)


def _motion_descriptor(trajectories: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    if cfg.node_variant == "scene_flow":
        v = velocities(trajectories)
        return v[:, 0, :] if len(v) else np.zeros((0, 3))
    return velocity_stats(trajectories, cfg.velocity_stats)


def node_features(positions: np.ndarray, trajectories: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Attributs de noeuds (M, D_node) selon cfg.node_variant"""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if cfg.node_variant == "position":
        return positions.copy()
    motion = _motion_descriptor(trajectories, cfg)
    if cfg.node_variant == "velocity":
        return motion
    return np.concatenate([positions, motion], axis=1)


def edge_features(positions: np.ndarray, motion: np.ndarray, edge_index: np.ndarray, variant: str) -> np.ndarray:
    """
    Attributs d'aretes (E, D_edge)

    Args:
        positions: (M,3)
        motion: (M,S) statistiques de vitesse des noeuds
        edge_index: (E,2)
        variant: position / velocity / both
    """
    edge_index = np.asarray(edge_index, dtype=np.int64).reshape(-1, 2)
    src, dst = edge_index[:, 0], edge_index[:, 1]
    pos = positions[src] - positions[dst]
    vel = motion[src] - motion[dst]
    if variant == "position":
        return pos
    if variant == "velocity":
        return vel
    return np.concatenate([pos, vel], axis=1)


def knn_edges(points: np.ndarray, k: int) -> np.ndarray:
    """Aretes dirigees (i, voisin) des k plus proches voisins, (E,2)"""
    points = np.asarray(points, dtype=np.float64)
    neighbors = knn_indices(points, k)
    m, kk = neighbors.shape
    if kk == 0:
        return np.zeros((0, 2), dtype=np.int64)
    src = np.repeat(np.arange(m, dtype=np.int64), kk)
    return np.column_stack([src, neighbors.ravel()])


def mean_velocity(trajectories: np.ndarray) -> np.ndarray:
    v = velocities(trajectories)
    return v.mean(axis=1) if len(v) else np.zeros((0, 3))


def graph_edges(positions: np.ndarray, trajectories: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Aretes selon l'espace kNN configure"""
    if cfg.knn_space == "velocity":
        return knn_edges(mean_velocity(trajectories), cfg.k)
    edges = knn_edges(positions, cfg.k)
    if cfg.knn_space == "position_velocity_cut" and len(edges):
        mv = mean_velocity(trajectories)
        gap = np.sqrt(np.sum((mv[edges[:, 0]] - mv[edges[:, 1]]) ** 2, axis=1))
        edges = edges[gap <= cfg.velocity_cut]
    return edges


def edge_labels(gt_ids: np.ndarray, edge_index: np.ndarray, moving_ids: Seq[int]) -> np.ndarray:
    """Vrai si les deux extremites partagent un id d'objet mobile"""
    gt_ids = np.asarray(gt_ids, dtype=np.int64)
    edge_index = np.asarray(edge_index, dtype=np.int64).reshape(-1, 2)
    a, b = gt_ids[edge_index[:, 0]], gt_ids[edge_index[:, 1]]
    return (a == b) & (a >= 0) & np.isin(a, np.asarray(list(moving_ids), dtype=np.int64))


def build_graph(frame: FilteredFrame, cfg: FeatureConfig, moving_gt_ids: Optional[Seq[int]] = None) -> MotionGraph:
    """
    Construit le graphe de mouvement d'une frame filtree

    Args:
        frame: Frame filtree
        cfg: Construction / attributs
        moving_gt_ids: Ids des objets mobiles (> 1 m/s); derives des boites si None

    Returns:
        MotionGraph
    """
    if moving_gt_ids is None:
        moving_gt_ids = moving_instance_ids(frame.gt_boxes, 1.0)
    positions = frame.points
    traj = frame.trajectories
    edges = graph_edges(positions, traj, cfg)
    motion = _motion_descriptor(traj, cfg)
    graph = MotionGraph(
        node_feats=node_features(positions, traj, cfg),
        edge_index=edges,
        edge_feats=edge_features(positions, motion, edges, cfg.edge_variant),
        edge_labels=edge_labels(frame.gt_instance_ids, edges, moving_gt_ids),
        node_positions=positions,
        node_gt_ids=frame.gt_instance_ids,
        frame_index=frame.frame_index,
    )
    logger.debug(
        "[Graph] frame %d: %d nodes, %d edges, %d positive",
        frame.frame_index, graph.num_nodes, graph.num_edges, int(graph.edge_labels.sum()),
    )
    return graph


def merge_graphs(graphs: List[MotionGraph]) -> MotionGraph:
    """Union disjointe (indices d'aretes decales) pour un lot d'entrainement"""
    if not graphs:
        raise ShapeError("cannot merge an empty list of graphs")
    dims = {(g.node_feats.shape[1], g.edge_feats.shape[1]) for g in graphs if g.num_nodes}
    if len(dims) > 1:
        raise ShapeError(f"graphs in a batch have different feature dims: {sorted(dims)}")
    offsets = np.cumsum([0] + [g.num_nodes for g in graphs[:-1]])
    return MotionGraph(
        node_feats=np.concatenate([g.node_feats for g in graphs], axis=0),
        edge_index=np.concatenate([g.edge_index + off for g, off in zip(graphs, offsets)], axis=0),
        edge_feats=np.concatenate([g.edge_feats for g in graphs], axis=0),
        edge_labels=np.concatenate([g.edge_labels for g in graphs]),
        node_positions=np.concatenate([g.node_positions for g in graphs], axis=0),
        node_gt_ids=np.concatenate([g.node_gt_ids for g in graphs]),
        frame_index=graphs[0].frame_index,
    )


def graph_oracle_eval(
    graph: MotionGraph,
    frame: FilteredFrame,
    cluster_cfg: Optional[ClusterConfig] = None,
    box_cfg: Optional[BoxConfig] = None,
    eval_cfg: Optional[EvalConfig] = None,
) -> MetricsReport:
    """
    Plafond de la construction du graphe: etiquettes d'aretes prises comme scores parfaits

    Returns:
        MetricsReport (Pr/Re/F1 par seuil)
    """
    cluster_cfg = cluster_cfg or ClusterConfig()
    box_cfg = box_cfg or BoxConfig()
    eval_cfg = eval_cfg or EvalConfig()
    scores = graph.edge_labels.astype(np.float64)
    result = segment(graph.num_nodes, graph.edge_index, scores, cluster_cfg)
    labels = boxes_from_segmentation(frame, result, box_cfg)
    report = MetricsReport(eval_cfg.thresholds)
    report.add(match_and_score([lab.box for lab in labels], frame, eval_cfg))
    return report
