"""
Boxes - Extraction et gonflage des boites de pseudo-labels
===========================================================

Transforme les clusters de points en boites 3D orientees: cap derive de la
trajectoire moyenne, centre au milieu de l'etendue, rejet des boites plates,
gonflage aux dimensions minimales d'un profil.

Features:
- Cap par trajectoire moyenne (pas 1 -> 2), repli ACP en vue de dessus
- Profils de gonflage waymo / av2 / custom / none
- Extraction oracle par identite verite terrain
- Fichiers de labels `cx cy cz l w h yaw score`

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence as Seq, Tuple, Union

import numpy as np

from core.cluster import SegmentationResult
from core.errors import ConfigError, DataError, LabelFormatError
from core.geometry import Box3D, rotate_xy, wrap_angle
from core.preprocess import FilteredFrame
from core.scene import moving_instance_ids

logger = logging.getLogger(__name__)

INFLATION_PROFILES = {
    "waymo": (1.0, 1.0, 2.0),
    "av2": (0.75, 0.75, 1.75),
}
CENTER_MODES = ("extent", "centroid")


@dataclass(frozen=True)
class BoxConfig:
    """Extraction et gonflage"""

    profile: str = "waymo"
    minima: Tuple[float, float, float] = (1.0, 1.0, 2.0)
    center_mode: str = "extent"
    min_dim: float = 0.1
    heading_eps: float = 1e-3

    def __post_init__(self):
        if self.profile not in (*INFLATION_PROFILES, "custom", "none"):
            raise ConfigError("boxes.profile must be waymo, av2, custom or none")
        if len(self.minima) != 3 or any(not m > 0 for m in self.minima):
            raise ConfigError("boxes.minima must be three values > 0")
        if self.center_mode not in CENTER_MODES:
            raise ConfigError(f"boxes.center_mode must be one of {', '.join(CENTER_MODES)}")
        if self.min_dim < 0 or not self.heading_eps > 0:
            raise ConfigError("boxes.min_dim must be >= 0 and boxes.heading_eps > 0")

    def inflation_minima(self) -> Optional[Tuple[float, float, float]]:
        """Minima du profil (None = pas de gonflage)"""
        if self.profile == "none":
            return None
        if self.profile == "custom":
            return tuple(self.minima)
        return INFLATION_PROFILES[self.profile]


@dataclass(frozen=True)
class PseudoLabel:
    box: Box3D
    score: float = 1.0

    def line(self) -> str:
        values = [*self.box.center, *self.box.dims, self.box.yaw, self.score]
        return " ".join(f"{v:.9g}" for v in values)


def bev_principal_heading(points: np.ndarray) -> float:
    """Direction principale des points en vue de dessus (0 si degeneree)"""
    xy = np.asarray(points, dtype=np.float64)[:, :2]
    centered = xy - xy.mean(axis=0)
    cov = centered.T @ centered
    if not np.any(cov):
        return 0.0
    eigvals, eigvecs = np.linalg.eigh(cov)
    major = eigvecs[:, int(np.argmax(eigvals))]
    return math.atan2(major[1], major[0])


def cluster_heading(points: np.ndarray, trajectories: np.ndarray, eps: float = 1e-3) -> float:
    """Cap d'un cluster depuis sa trajectoire moyenne (positions 1 et 2)"""
    mean_traj = np.asarray(trajectories, dtype=np.float64).mean(axis=0)
    step = mean_traj[2, :2] - mean_traj[1, :2]
    if math.hypot(step[0], step[1]) < eps:
        return wrap_angle(bev_principal_heading(points))
    return wrap_angle(math.atan2(step[1], step[0]))


def extract_box(points: np.ndarray, trajectories: np.ndarray, cfg: BoxConfig = BoxConfig()) -> Optional[Box3D]:
    """
    Boite orientee d'un cluster

    Args:
        points: (n,3) points du cluster (n >= 2)
        trajectories: (n,25,3) trajectoires alignees
        cfg: Mode de centre, dimension minimale

    Returns:
        Box3D, ou None si une dimension est < cfg.min_dim
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 2:
        return None
    yaw = cluster_heading(pts, trajectories, cfg.heading_eps)
    local = rotate_xy(pts, -yaw)
    if cfg.center_mode == "centroid":
        center_local = local.mean(axis=0)
        dims = 2.0 * np.abs(local - center_local).max(axis=0)
    else:
        low, high = local.min(axis=0), local.max(axis=0)
        center_local = (low + high) / 2.0
        dims = high - low
    if np.any(dims < cfg.min_dim):
        return None
    center = rotate_xy(center_local[None, :], yaw)[0]
    return Box3D(tuple(center.tolist()), tuple(dims.tolist()), yaw)


def inflate(box: Box3D, minima: Optional[Seq[float]]) -> Box3D:
    """Gonfle chaque dimension a au moins son minimum (centre et cap inchanges)"""
    if minima is None:
        return box
    dims = tuple(max(d, float(m)) for d, m in zip(box.dims, minima))
    return Box3D(box.center, dims, box.yaw)


def boxes_from_segmentation(frame: FilteredFrame, result: SegmentationResult, cfg: BoxConfig = BoxConfig()) -> List[PseudoLabel]:
    """Boites gonflees des clusters d'une frame, avec leur score"""
    labels = []
    minima = cfg.inflation_minima()
    for c, members in enumerate(result.clusters):
        box = extract_box(frame.points[members], frame.trajectories[members], cfg)
        if box is None:
            continue
        score = result.scores[c] if c < len(result.scores) else 1.0
        labels.append(PseudoLabel(inflate(box, minima), score))
    return labels


def oracle_clusters(frame: FilteredFrame, x_f: int = 2, moving_only: bool = True) -> SegmentationResult:
    """Clusters par identite verite terrain (groupes d'au moins x_f points)"""
    ids = frame.gt_instance_ids
    allowed = set(moving_instance_ids(frame.gt_boxes).tolist()) if moving_only else None
    result = SegmentationResult()
    for gid in np.unique(ids[ids >= 0]):
        if allowed is not None and int(gid) not in allowed:
            continue
        members = np.flatnonzero(ids == gid)
        if len(members) >= max(x_f, 1):
            result.clusters.append(members)
            result.scores.append(1.0)
    return result


def oracle_extract(frame: FilteredFrame, x_f: int = 2, cfg: BoxConfig = BoxConfig(), moving_only: bool = True) -> List[PseudoLabel]:
    """
    Extraction oracle: boites des groupes d'identite verite terrain

    Args:
        frame: Frame filtree avec ids
        x_f: Nombre minimal de points interieurs
        cfg: Extraction / gonflage
        moving_only: Seuls les objets > 1 m/s
    """
    return boxes_from_segmentation(frame, oracle_clusters(frame, x_f, moving_only), cfg)


def write_labels(labels: Seq[PseudoLabel], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_labels(labels), encoding="utf-8")
    return path


def render_labels(labels: Seq[PseudoLabel]) -> str:
    return "".join(label.line() + "\n" for label in labels)


def parse_labels(text: str, source: str = "<labels>") -> List[PseudoLabel]:
    out = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 8:
            raise LabelFormatError(f"{source}: line {number}: expected 8 values, got {len(parts)}")
        try:
            values = [float(v) for v in parts]
        except ValueError as exc:
            raise LabelFormatError(f"{source}: line {number}: bad number") from exc
        try:
            box = Box3D(tuple(values[0:3]), tuple(values[3:6]), values[6])
        except DataError as exc:
            raise LabelFormatError(f"{source}: line {number}: {exc}") from exc
        out.append(PseudoLabel(box, values[7]))
    return out


def read_labels(path: Union[str, Path]) -> List[PseudoLabel]:
    """Relit un fichier de labels (LabelFormatError en nommant la ligne)"""
    path = Path(path)
    if not path.is_file():
        raise LabelFormatError(f"label file not found: {path}")
    return parse_labels(path.read_text(encoding="utf-8"), str(path))
