"""
Preprocess - Filtrage des points statiques, du sol et hors portee
==================================================================

Produit le nuage filtre d'une frame: recadrage en portee, suppression du sol
(RANSAC), suppression des points statiques (vitesse Chamfer), puis attache
une trajectoire de 25 positions a chaque survivant.

Features:
- Vitesse Chamfer compensee de l'ego
- Plan de sol RANSAC seede
- Sources de trajectoires: oracle, oracle bruite, vitesse constante
- Rapport precision / rappel de la suppression statique

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from core.errors import ConfigError, ShapeError
from core.geometry import Box3D, EgoPose, points_in_box, transfer_points
from core.scene import (
    FRAME_DT,
    HORIZON,
    Frame,
    GtBox,
    Sequence,
    corrupt_trajectories,
    frame_seed,
    gt_trajectories,
)
from core.spatial import nearest_neighbor

logger = logging.getLogger(__name__)

TRAJECTORY_SOURCES = ("oracle", "noisy-oracle", "constant-velocity")
INTERIOR_THRESHOLDS = (0, 1, 10, 30, 50)
GROUND_SALT = 1
TRAJECTORY_SALT = 2


@dataclass(frozen=True)
class FilterConfig:
    """Parametres du filtrage"""

    range_m: float = 80.0
    max_z: float = 4.0
    gap: int = 4
    speed_threshold: float = 0.2
    remove_ground: bool = True
    remove_static: bool = True
    ground_threshold: float = 0.2
    ground_iterations: int = 100
    ground_max_tilt_deg: float = 30.0
    trajectory_source: str = "oracle"
    traj_sigma: float = 0.0
    traj_outlier_fraction: float = 0.0

    def __post_init__(self):
        if not self.range_m > 0:
            raise ConfigError("filter.range_m must be > 0")
        if self.gap < 1:
            raise ConfigError("filter.gap must be >= 1")
        if self.speed_threshold < 0:
            raise ConfigError("filter.speed_threshold must be >= 0")
        if not self.ground_threshold > 0 or self.ground_iterations < 1:
            raise ConfigError("filter.ground_threshold must be > 0 and filter.ground_iterations >= 1")
        if not 0 <= self.ground_max_tilt_deg <= 90:
            raise ConfigError("filter.ground_max_tilt_deg must be in [0, 90]")
        if self.trajectory_source not in TRAJECTORY_SOURCES:
            raise ConfigError(
                f"filter.trajectory_source must be one of {', '.join(TRAJECTORY_SOURCES)}"
            )
        if self.traj_sigma < 0 or not 0 <= self.traj_outlier_fraction <= 1:
            raise ConfigError("filter.traj_sigma must be >= 0 and filter.traj_outlier_fraction in [0, 1]")


@dataclass(frozen=True, eq=False)
class FilteredFrame:
    """
    Nuage filtre d'une frame

    points: (M,3) survivants, repere capteur de la frame
    origin_index: (M,) index de chaque point dans la frame brute
    trajectories: (M,25,3) positions compensees de l'ego
    """

    points: np.ndarray
    origin_index: np.ndarray
    trajectories: np.ndarray
    gt_instance_ids: np.ndarray
    gt_boxes: Tuple[GtBox, ...]
    timestamp_s: float = 0.0
    ego_pose: EgoPose = EgoPose(0.0, 0.0, 0.0, 0.0)
    frame_index: int = 0

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        m = len(points)
        origin = np.asarray(self.origin_index, dtype=np.int64).reshape(-1)
        traj = np.asarray(self.trajectories, dtype=np.float64)
        if m == 0:
            traj = np.zeros((0, HORIZON + 1, 3))
        ids = np.asarray(self.gt_instance_ids, dtype=np.int64).reshape(-1)
        if traj.ndim != 3 or traj.shape[2] != 3:
            raise ShapeError(f"FilteredFrame: trajectories must be (M, {HORIZON + 1}, 3), got {traj.shape}")
        if not (len(origin) == len(ids) == len(traj) == m):
            raise ShapeError(
                f"FilteredFrame: {m} points, {len(origin)} origin indices, "
                f"{len(traj)} trajectories, {len(ids)} gt ids"
            )
        if traj.shape[1] != HORIZON + 1:
            raise ShapeError(f"FilteredFrame: trajectory length {traj.shape[1]}, expected {HORIZON + 1}")
        if len(np.unique(origin)) != m or (m and origin.min() < 0):
            raise ShapeError("FilteredFrame: origin indices must be unique and >= 0")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "origin_index", origin)
        object.__setattr__(self, "trajectories", traj)
        object.__setattr__(self, "gt_instance_ids", ids)
        object.__setattr__(self, "gt_boxes", tuple(self.gt_boxes))
        object.__setattr__(self, "ego_pose", EgoPose(*self.ego_pose))

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, mask: np.ndarray) -> "FilteredFrame":
        return FilteredFrame(
            points=self.points[mask],
            origin_index=self.origin_index[mask],
            trajectories=self.trajectories[mask],
            gt_instance_ids=self.gt_instance_ids[mask],
            gt_boxes=self.gt_boxes,
            timestamp_s=self.timestamp_s,
            ego_pose=self.ego_pose,
            frame_index=self.frame_index,
        )


@dataclass
class FilterStats:
    """Compteurs de filtrage (cumulables sur plusieurs frames)"""

    frames: int = 0
    raw_points: int = 0
    after_range: int = 0
    after_ground: int = 0
    after_static: int = 0
    empty_reference: int = 0

    def add(self, other: "FilterStats") -> None:
        for name in ("frames", "raw_points", "after_range", "after_ground", "after_static", "empty_reference"):
            setattr(self, name, getattr(self, name) + getattr(other, name))


def reference_index(t: int, num_frames: int, gap: int) -> Optional[int]:
    """Frame de reference Chamfer: t+gap, sinon t-gap, sinon la plus eloignee"""
    if t + gap < num_frames:
        return t + gap
    if t - gap >= 0:
        return t - gap
    if num_frames <= 1:
        return None
    return max(range(num_frames), key=lambda i: (abs(i - t), i))


def chamfer_displacement(frame_t: Frame, frame_ref: Optional[Frame], points: Optional[np.ndarray] = None) -> Tuple[np.ndarray, float]:
    """
    Deplacement vers le plus proche voisin dans la frame de reference

    Returns:
        (deplacements (N,3) signes dans le sens du temps, intervalle en secondes);
        lignes +inf si la reference est vide
    """
    pts = frame_t.points if points is None else points
    if frame_ref is None or len(frame_ref.points) == 0:
        return np.full((len(pts), 3), np.inf), 0.0
    ref = transfer_points(frame_ref.points, frame_ref.ego_pose, frame_t.ego_pose)
    dist, idx = nearest_neighbor(pts, ref)
    dt = frame_ref.timestamp_s - frame_t.timestamp_s
    if abs(dt) < 1e-9:
        dt = 4 * FRAME_DT
    disp = ref[idx] - pts if len(pts) else np.zeros((0, 3))
    if dt < 0:
        disp = -disp
    return disp, abs(dt)


def chamfer_velocity(frame_t: Frame, frame_t4: Optional[Frame], points: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Vitesse approchee de chaque point par distance de Chamfer

    Args:
        frame_t: Frame courante
        frame_t4: Frame de reference (4 frames plus loin par defaut)
        points: Sous-ensemble des points de frame_t (repere capteur), tous par defaut

    Returns:
        Vitesses (N,) en m/s; +inf partout si la reference est vide
    """
    pts = frame_t.points if points is None else np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if frame_t4 is None or len(frame_t4.points) == 0:
        return np.full(len(pts), np.inf)
    disp, dt = chamfer_displacement(frame_t, frame_t4, pts)
    return np.sqrt(np.sum(disp ** 2, axis=1)) / dt


def remove_ground(
    points: np.ndarray,
    threshold: float = 0.2,
    iterations: int = 100,
    max_tilt_deg: float = 30.0,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    Masque des points conserves apres ajustement RANSAC du plan de sol

    Seuls les plans a moins de max_tilt_deg de l'horizontale sont candidats.
    Moins de 3 points ou aucun plan valide: masque identite.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    keep = np.ones(n, dtype=bool)
    if n < 3:
        return keep
    rng = rng if rng is not None else np.random.default_rng(0)
    min_cos = math.cos(math.radians(max_tilt_deg))

    best: Optional[np.ndarray] = None
    best_count = 0
    for _ in range(iterations):
        a, b, c = pts[rng.choice(n, size=3, replace=False)]
        normal = np.cross(b - a, c - a)
        norm = float(np.linalg.norm(normal))
        if norm < 1e-12:
            continue
        normal /= norm
        if abs(normal[2]) < min_cos:
            continue
        inliers = np.abs((pts - a) @ normal) <= threshold
        count = int(inliers.sum())
        if count > best_count:
            best, best_count = inliers, count

    if best is None:
        return keep
    return ~best


def range_mask(points: np.ndarray, range_m: float, max_z: float) -> np.ndarray:
    """Points a moins de range_m horizontalement de l'ego et sous max_z"""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return (np.hypot(pts[:, 0], pts[:, 1]) <= range_m) & (pts[:, 2] < max_z)


def constant_velocity_trajectories(points: np.ndarray, displacement: np.ndarray, dt: float) -> np.ndarray:
    """Extrapole le deplacement Chamfer a vitesse constante sur l'horizon"""
    velocity = np.where(np.isfinite(displacement), displacement, 0.0) / (dt if dt > 0 else 1.0)
    steps = np.arange(HORIZON + 1, dtype=np.float64) * FRAME_DT
    return points[:, None, :] + velocity[:, None, :] * steps[None, :, None]


def filter_frame(
    frame_t: Frame,
    frame_t4: Optional[Frame],
    cfg: FilterConfig,
    trajectories: Optional[np.ndarray] = None,
    frame_index: int = 0,
    rng: Optional[np.random.Generator] = None,
    stats: Optional[FilterStats] = None,
) -> FilteredFrame:
    """
    Filtre une frame: portee -> sol -> statique

    Args:
        frame_t: Frame a filtrer
        frame_t4: Frame de reference Chamfer (None = reference vide)
        cfg: Parametres de filtrage
        trajectories: (N,25,3) pour tous les points de frame_t; None = vitesse constante
        frame_index: Index de la frame dans sa sequence
        rng: Generateur pour le RANSAC
        stats: Compteurs mis a jour en place

    Returns:
        FilteredFrame (eventuellement vide)
    """
    local = FilterStats(frames=1, raw_points=len(frame_t.points))
    idx = np.flatnonzero(range_mask(frame_t.points, cfg.range_m, cfg.max_z))
    local.after_range = len(idx)

    if cfg.remove_ground and len(idx):
        keep = remove_ground(
            frame_t.points[idx], cfg.ground_threshold, cfg.ground_iterations, cfg.ground_max_tilt_deg, rng
        )
        idx = idx[keep]
    local.after_ground = len(idx)

    reference_empty = frame_t4 is None or len(frame_t4.points) == 0
    if reference_empty:
        local.empty_reference = 1
        logger.warning("[Preprocess] [WARN] frame %d: empty Chamfer reference, all points kept as moving", frame_index)
    pts = frame_t.points[idx]
    disp, dt = chamfer_displacement(frame_t, frame_t4, pts)
    if cfg.remove_static and len(idx):
        speed = np.sqrt(np.sum(disp ** 2, axis=1)) / dt if dt > 0 else np.full(len(idx), np.inf)
        moving = speed >= cfg.speed_threshold
        idx, pts, disp = idx[moving], pts[moving], disp[moving]
    local.after_static = len(idx)

    if trajectories is None:
        traj = constant_velocity_trajectories(pts, disp, dt)
    else:
        traj = np.asarray(trajectories, dtype=np.float64)
        if traj.shape[0] != len(frame_t.points):
            raise ShapeError(f"trajectories cover {traj.shape[0]} points, frame has {len(frame_t.points)}")
        traj = traj[idx]

    if stats is not None:
        stats.add(local)
    return FilteredFrame(
        points=pts,
        origin_index=idx,
        trajectories=traj,
        gt_instance_ids=frame_t.gt_instance_ids[idx],
        gt_boxes=frame_t.gt_boxes,
        timestamp_s=frame_t.timestamp_s,
        ego_pose=frame_t.ego_pose,
        frame_index=frame_index,
    )


def sequence_trajectories(seq: Sequence, t: int, cfg: FilterConfig) -> Optional[np.ndarray]:
    """Trajectoires de tous les points de la frame t selon la source configuree"""
    if cfg.trajectory_source == "constant-velocity":
        return None
    traj = gt_trajectories(seq, t)
    if cfg.trajectory_source == "noisy-oracle":
        traj = corrupt_trajectories(
            traj, cfg.traj_sigma, cfg.traj_outlier_fraction, frame_seed(seq.seed, t, TRAJECTORY_SALT)
        )
    return traj


def filter_sequence_frame(seq: Sequence, t: int, cfg: FilterConfig, stats: Optional[FilterStats] = None) -> FilteredFrame:
    """Filtre la frame t d'une sequence (reference et graines derivees de la sequence)"""
    ref = reference_index(t, len(seq.frames), cfg.gap)
    return filter_frame(
        seq.frames[t],
        None if ref is None else seq.frames[ref],
        cfg,
        trajectories=sequence_trajectories(seq, t, cfg),
        frame_index=t,
        rng=frame_seed(seq.seed, t, GROUND_SALT),
        stats=stats,
    )


def static_point_mask(frame: Frame, speed_threshold: float = 1.0) -> np.ndarray:
    """Points statiques selon la verite terrain (fond, bruit, objets lents)"""
    speeds = {b.instance_id: b.speed for b in frame.gt_boxes}
    return np.array(
        [gid < 0 or speeds.get(int(gid), 0.0) <= speed_threshold for gid in frame.gt_instance_ids.tolist()],
        dtype=bool,
    )


def static_removal_scores(is_static: np.ndarray, removed: np.ndarray) -> Dict[str, float]:
    """
    Precision / rappel de la suppression des points statiques

    TP = point statique supprime, FP = point mobile supprime.
    """
    is_static = np.asarray(is_static, dtype=bool)
    removed = np.asarray(removed, dtype=bool)
    tp = int(np.sum(is_static & removed))
    fp = int(np.sum(~is_static & removed))
    fn = int(np.sum(is_static & ~removed))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return {"tp": tp, "fp": fp, "fn": fn, "precision": precision, "recall": recall}


@dataclass
class FilteringReport:
    """Rapport de filtrage cumule"""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    # compte de boites (statiques / mobiles) par seuil x_f, avant / apres filtrage
    box_counts: Dict[str, int] = field(default_factory=lambda: {"static": 0, "moving": 0})
    retained: Dict[Tuple[str, str, int], int] = field(default_factory=dict)

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    def percent(self, kind: str, stage: str, threshold: int) -> float:
        total = self.box_counts[kind]
        if total == 0:
            return 0.0
        return 100.0 * self.retained.get((kind, stage, threshold), 0) / total

    def rows(self) -> List[List[str]]:
        """Lignes CSV: metriques puis tableau des points interieurs"""
        out = [
            ["metric", "value"],
            ["static_removal_precision", f"{self.precision:.4f}"],
            ["static_removal_recall", f"{self.recall:.4f}"],
            ["removed_static_points", str(self.tp)],
            ["removed_moving_points", str(self.fp)],
            [],
            ["x_f", "static_original", "static_filtered", "moving_original", "moving_filtered"],
        ]
        for x in INTERIOR_THRESHOLDS:
            out.append([
                str(x),
                f"{self.percent('static', 'original', x):.4f}",
                f"{self.percent('static', 'filtered', x):.4f}",
                f"{self.percent('moving', 'original', x):.4f}",
                f"{self.percent('moving', 'filtered', x):.4f}",
            ])
        return out


def _interior_counts(points: np.ndarray, boxes: Tuple[GtBox, ...]) -> List[int]:
    return [int(points_in_box(points, Box3D(b.center, b.dims, b.yaw)).sum()) for b in boxes]


def report_frame(report: FilteringReport, frame: Frame, filtered: FilteredFrame) -> None:
    """Ajoute une frame au rapport de filtrage"""
    removed = np.ones(len(frame.points), dtype=bool)
    removed[filtered.origin_index] = False
    scores = static_removal_scores(static_point_mask(frame), removed)
    report.tp += scores["tp"]
    report.fp += scores["fp"]
    report.fn += scores["fn"]

    before = _interior_counts(frame.points, frame.gt_boxes)
    after = _interior_counts(filtered.points, frame.gt_boxes)
    for box, n_before, n_after in zip(frame.gt_boxes, before, after):
        kind = "moving" if box.speed > 1.0 else "static"
        report.box_counts[kind] += 1
        for x in INTERIOR_THRESHOLDS:
            if n_before >= x:
                report.retained[(kind, "original", x)] = report.retained.get((kind, "original", x), 0) + 1
            if n_after >= x:
                report.retained[(kind, "filtered", x)] = report.retained.get((kind, "filtered", x), 0) + 1


def filtering_report(seq: Sequence, cfg: FilterConfig, report: Optional[FilteringReport] = None) -> FilteringReport:
    """
    Precision / rappel de la suppression statique et tableau des points interieurs

    Args:
        seq: Sequence avec verite terrain
        cfg: Parametres de filtrage
        report: Rapport a completer (plusieurs sequences)

    Returns:
        Rapport cumule
    """
    report = report if report is not None else FilteringReport()
    for t, frame in enumerate(seq.frames):
        report_frame(report, frame, filter_sequence_frame(seq, t, cfg))
    logger.info(
        "[Preprocess] seed=%d static removal precision=%.4f recall=%.4f",
        seq.seed, report.precision, report.recall,
    )
    return report
