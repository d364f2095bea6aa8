"""
Baselines - Clustering par densite (DBSCAN, DBSCAN++)
======================================================

DBSCAN vanilla sur les positions, DBSCAN++ (intersection position / flot),
variante long terme (9 statistiques de vitesse) et filtre de taille.

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence as Seq, Tuple

import numpy as np
from sklearn.cluster import DBSCAN

from core.boxes import BoxConfig, PseudoLabel, extract_box, inflate
from core.cluster import SegmentationResult
from core.errors import ConfigError
from core.graphbuild import velocities, velocity_stats
from core.preprocess import FilteredFrame

logger = logging.getLogger(__name__)

VARIANTS = ("vanilla", "plus", "plus_long")


@dataclass(frozen=True)
class DbscanConfig:
    """Parametres des baselines densite"""

    eps_pos: float = 1.0
    eps_flow: float = 0.1
    min_samples_pos: int = 10
    min_samples_flow: int = 10
    min_samples_intersection: int = 20
    variant: str = "plus"
    size_filter: bool = True
    length_range: Tuple[float, float] = (0.3, 20.0)
    width_range: Tuple[float, float] = (0.3, 4.0)
    height_range: Tuple[float, float] = (0.5, 4.0)

    def __post_init__(self):
        if not self.eps_pos > 0 or not self.eps_flow > 0:
            raise ConfigError("baseline.eps_pos and baseline.eps_flow must be > 0")
        for name in ("min_samples_pos", "min_samples_flow", "min_samples_intersection"):
            if getattr(self, name) < 1:
                raise ConfigError(f"baseline.{name} must be >= 1")
        if self.variant not in VARIANTS:
            raise ConfigError(f"baseline.variant must be one of {', '.join(VARIANTS)}")
        for name in ("length_range", "width_range", "height_range"):
            low, high = getattr(self, name)
            if low < 0 or high < low:
                raise ConfigError(f"baseline.{name} must satisfy 0 <= low <= high")

    @property
    def display_name(self) -> str:
        name = {"vanilla": "DBSCAN", "plus": "DBSCAN++", "plus_long": "DBSCAN++l"}[self.variant]
        return name + ("†" if self.size_filter else "")


def dbscan(points: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """
    Etiquettes DBSCAN (-1 = bruit)

    Voisinage inclusif (distance <= eps), le point compte dans son voisinage.
    Un point de bord rejoint le premier cluster qui l'atteint.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) == 0:
        return np.zeros(0, dtype=np.int64)
    pts = pts.reshape(len(pts), -1)
    labels = DBSCAN(eps=eps, min_samples=min_samples, algorithm="kd_tree").fit_predict(pts)
    return np.asarray(labels, dtype=np.int64)


def flow_features(trajectories: np.ndarray, variant: str) -> np.ndarray:
    """Flot par point: premier pas (plus) ou 9 statistiques (plus_long)"""
    if variant == "plus_long":
        return velocity_stats(trajectories, "axis")
    v = velocities(trajectories)
    return v[:, 0, :] if len(v) else np.zeros((0, 3))


def _groups(labels: np.ndarray, min_size: int) -> List[np.ndarray]:
    out = []
    for lab in np.unique(labels[labels >= 0]):
        members = np.flatnonzero(labels == lab)
        if len(members) >= min_size:
            out.append(members)
    return out


def intersect_labels(pos_labels: np.ndarray, flow_labels: np.ndarray, min_samples: int) -> List[np.ndarray]:
    """Groupes de points partageant le couple (etiquette position, etiquette flot)"""
    valid = (pos_labels >= 0) & (flow_labels >= 0)
    idx = np.flatnonzero(valid)
    if len(idx) == 0:
        return []
    keys = np.column_stack([pos_labels[idx], flow_labels[idx]])
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    groups = [idx[inverse == g] for g in range(inverse.max() + 1)]
    return [g for g in groups if len(g) >= min_samples]


def dbscan_plus(frame: FilteredFrame, cfg: DbscanConfig) -> SegmentationResult:
    """
    Segmentation baseline d'une frame filtree

    vanilla: DBSCAN sur les positions; plus / plus_long: intersection avec
    un DBSCAN sur le flot.
    """
    n = len(frame.points)
    result = SegmentationResult()
    if n == 0:
        return result
    pos_labels = dbscan(frame.points, cfg.eps_pos, cfg.min_samples_pos)
    if cfg.variant == "vanilla":
        clusters = _groups(pos_labels, 2)
    else:
        flow = flow_features(frame.trajectories, cfg.variant)
        flow_labels = dbscan(flow, cfg.eps_flow, cfg.min_samples_flow)
        clusters = intersect_labels(pos_labels, flow_labels, cfg.min_samples_intersection)
    clusters.sort(key=lambda m: int(m[0]))
    result.clusters = clusters
    result.scores = [1.0] * len(clusters)
    assigned = np.zeros(n, dtype=bool)
    for members in clusters:
        assigned[members] = True
    result.unassigned = np.flatnonzero(~assigned)
    return result


def passes_size_filter(dims: Seq[float], cfg: DbscanConfig) -> bool:
    l, w, h = dims
    return (
        cfg.length_range[0] <= l <= cfg.length_range[1]
        and cfg.width_range[0] <= w <= cfg.width_range[1]
        and cfg.height_range[0] <= h <= cfg.height_range[1]
    )


def size_filter(labels: Seq[PseudoLabel], cfg: DbscanConfig) -> List[PseudoLabel]:
    """Garde les boites aux dimensions plausibles"""
    return [lab for lab in labels if passes_size_filter(lab.box.dims, cfg)]


def baseline_labels(frame: FilteredFrame, cfg: DbscanConfig, box_cfg: BoxConfig = BoxConfig()) -> List[PseudoLabel]:
    """Pseudo-labels baseline: segmentation, extraction, filtre de taille, gonflage"""
    return labels_from_result(frame, dbscan_plus(frame, cfg), cfg, box_cfg)


def labels_from_result(frame: FilteredFrame, result: SegmentationResult, cfg: DbscanConfig,
                       box_cfg: BoxConfig = BoxConfig()) -> List[PseudoLabel]:
    raw = []
    for members in result.clusters:
        box = extract_box(frame.points[members], frame.trajectories[members], box_cfg)
        if box is not None:
            raw.append(PseudoLabel(box, 1.0))
    if cfg.size_filter:
        raw = size_filter(raw, cfg)
    minima = box_cfg.inflation_minima()
    return [PseudoLabel(inflate(lab.box, minima), lab.score) for lab in raw]


def baseline_summary(results: Seq[SegmentationResult]) -> Dict[str, int]:
    return {
        "clusters": sum(len(r.clusters) for r in results),
        "unassigned": sum(len(r.unassigned) for r in results),
    }
