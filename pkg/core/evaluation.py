"""
Evaluation - IoU, appariement et metriques Pr/Re/F1
====================================================

Evaluation des pseudo-labels contre la verite terrain d'une frame:
SegIoU (masques de points interieurs) ou 3DIoU (polygone BEV x
recouvrement vertical), appariement glouton, regions ignorees, rappel
par classe et pourcentage de faux positifs non apparies (uFP).

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence as Seq, Tuple

import numpy as np

from core.errors import ConfigError
from core.geometry import Box3D, points_in_box
from core.preprocess import FilteredFrame
from core.scene import CLASS_NAMES, GtBox

logger = logging.getLogger(__name__)

IOU_KINDS = ("seg", "box3d")
EVAL_MODES = ("moving_only", "all_with_ignore")


@dataclass(frozen=True)
class EvalConfig:
    """Protocole d'evaluation"""

    iou_kind: str = "seg"
    thresholds: Tuple[float, ...] = (0.4, 0.7)
    region: Tuple[float, float] = (100.0, 40.0)
    moving_speed: float = 1.0
    min_interior: int = 1
    mode: str = "all_with_ignore"

    def __post_init__(self):
        if self.iou_kind not in IOU_KINDS:
            raise ConfigError(f"eval.iou_kind must be one of {', '.join(IOU_KINDS)}")
        if self.mode not in EVAL_MODES:
            raise ConfigError(f"eval.mode must be one of {', '.join(EVAL_MODES)}")
        if not self.thresholds or any(not 0 < t <= 1 for t in self.thresholds):
            raise ConfigError("eval.thresholds must be non-empty and in (0, 1]")
        if len(self.region) != 2 or any(not r > 0 for r in self.region):
            raise ConfigError("eval.region must be two lengths > 0")
        if self.min_interior < 0 or self.moving_speed < 0:
            raise ConfigError("eval.min_interior and eval.moving_speed must be >= 0")


def gt_box3d(box: GtBox) -> Box3D:
    return Box3D(box.center, box.dims, box.yaw)


def box3d_intersection(a: Box3D, b: Box3D) -> float:
    """Volume d'intersection exact (polygones BEV convexes x recouvrement en z)"""
    a_low, a_high = a.z_range
    b_low, b_high = b.z_range
    dz = min(a_high, b_high) - max(a_low, b_low)
    if dz <= 0:
        return 0.0
    area = a.bev_polygon().intersection(b.bev_polygon()).area
    return float(area * dz)


def box3d_iou(a: Box3D, b: Box3D) -> float:
    inter = box3d_intersection(a, b)
    if inter <= 0:
        return 0.0
    union = a.volume + b.volume - inter
    return float(min(max(inter / union, 0.0), 1.0)) if union > 0 else 0.0


def box3d_iou_matrix(preds: Seq[Box3D], gts: Seq[Box3D]) -> np.ndarray:
    out = np.zeros((len(preds), len(gts)))
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            out[i, j] = box3d_iou(p, g)
    return out


def interior_masks(boxes: Seq[Box3D], points: np.ndarray) -> np.ndarray:
    """Masques (B, M) des points interieurs (bord inclus)"""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if not boxes:
        return np.zeros((0, len(points)), dtype=bool)
    return np.stack([points_in_box(points, box) for box in boxes])


def seg_iou_matrix(preds: Seq[Box3D], gts: Seq[Box3D], points: np.ndarray) -> np.ndarray:
    """IoU des masques de points interieurs, |B| x |G|"""
    pm = interior_masks(preds, points).astype(np.int64)
    gm = interior_masks(gts, points).astype(np.int64)
    inter = pm @ gm.T
    union = pm.sum(axis=1)[:, None] + gm.sum(axis=1)[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        iou = np.where(union > 0, inter / np.maximum(union, 1), 0.0)
    return iou.astype(np.float64)


def greedy_match(iou: np.ndarray, threshold: float) -> List[Tuple[int, int]]:
    """Appariement un-a-un glouton par IoU decroissante (IoU >= seuil)"""
    if iou.size == 0:
        return []
    p_idx, g_idx = np.nonzero(iou >= threshold)
    values = iou[p_idx, g_idx]
    order = np.lexsort((g_idx, p_idx, -values))
    used_p, used_g, pairs = set(), set(), []
    for k in order:
        p, g = int(p_idx[k]), int(g_idx[k])
        if p in used_p or g in used_g:
            continue
        used_p.add(p)
        used_g.add(g)
        pairs.append((p, g))
    return pairs


def in_region(center: Seq[float], region: Tuple[float, float]) -> bool:
    return abs(center[0]) <= region[0] / 2.0 and abs(center[1]) <= region[1] / 2.0


@dataclass
class FrameMetrics:
    """Compteurs d'une frame (ou d'un cumul)"""

    counts: Dict[float, List[int]] = field(default_factory=dict)  # T -> [tp, fp, fn]
    class_counts: Dict[Tuple[str, float], List[int]] = field(default_factory=dict)  # (classe, T) -> [tp, gt]
    predictions: int = 0
    unmatched: int = 0


def _iou(kind: str, preds: Seq[Box3D], gts: Seq[Box3D], points: np.ndarray) -> np.ndarray:
    if kind == "seg":
        return seg_iou_matrix(preds, gts, points)
    return box3d_iou_matrix(preds, gts)


def _overlaps_any(kind: str, preds: Seq[Box3D], others: Seq[Box3D], points: np.ndarray) -> np.ndarray:
    if not preds or not others:
        return np.zeros(len(preds), dtype=bool)
    if kind == "seg":
        pm = interior_masks(preds, points).astype(np.int64)
        om = interior_masks(others, points).astype(np.int64)
        return (pm @ om.T > 0).any(axis=1)
    return np.array([any(box3d_intersection(p, o) > 0 for o in others) for p in preds], dtype=bool)


def split_gt(frame: FilteredFrame, cfg: EvalConfig) -> Tuple[List[GtBox], List[GtBox]]:
    """(boites cibles mobiles, boites ignorees) dans la region"""
    targets, ignore = [], []
    for box in frame.gt_boxes:
        if not in_region(box.center, cfg.region):
            continue
        if box.speed > cfg.moving_speed:
            interior = int(points_in_box(frame.points, gt_box3d(box)).sum()) if len(frame.points) else 0
            (targets if interior >= cfg.min_interior else ignore).append(box)
        else:
            ignore.append(box)
    return targets, ignore


def match_and_score(preds: Seq[Box3D], frame: FilteredFrame, cfg: EvalConfig) -> FrameMetrics:
    """
    Compteurs TP/FP/FN par seuil, rappel par classe et uFP pour une frame

    Args:
        preds: Boites predites (repere capteur de la frame)
        frame: Frame filtree avec verite terrain
        cfg: Protocole
    """
    preds = [p for p in preds if in_region(p.center, cfg.region)]
    targets, ignore = split_gt(frame, cfg)
    target_boxes = [gt_box3d(b) for b in targets]
    ignore_boxes = [gt_box3d(b) for b in ignore]
    points = frame.points
    metrics = FrameMetrics(predictions=len(preds))

    iou = _iou(cfg.iou_kind, preds, target_boxes, points)
    if cfg.mode == "all_with_ignore":
        ignorable = _overlaps_any(cfg.iou_kind, preds, ignore_boxes, points)
    else:
        ignorable = np.zeros(len(preds), dtype=bool)

    for t in cfg.thresholds:
        pairs = greedy_match(iou, t)
        matched = {p for p, _ in pairs}
        fp = sum(1 for i in range(len(preds)) if i not in matched and not ignorable[i])
        metrics.counts[t] = [len(pairs), fp, len(target_boxes) - len(pairs)]

    # classe par recouvrement 3D > 0 avec la boite verite terrain de plus grande IoU
    all_gt = targets + ignore
    overlap = box3d_iou_matrix(preds, [gt_box3d(b) for b in all_gt])
    assigned: List[Optional[str]] = []
    for i in range(len(preds)):
        if overlap.shape[1] and overlap[i].max() > 0:
            assigned.append(all_gt[int(np.argmax(overlap[i]))].class_name)
        else:
            assigned.append(None)

    every_gt = [gt_box3d(b) for b in frame.gt_boxes]
    if every_gt and preds:
        any_overlap = np.array([any(box3d_intersection(p, g) > 0 for g in every_gt) for p in preds])
        metrics.unmatched = int(np.sum(~any_overlap))
    else:
        metrics.unmatched = len(preds)

    for name in CLASS_NAMES:
        cls_targets = [j for j, b in enumerate(targets) if b.class_name == name]
        cls_preds = [i for i, c in enumerate(assigned) if c == name]
        sub = iou[np.ix_(cls_preds, cls_targets)] if cls_preds and cls_targets else np.zeros((len(cls_preds), len(cls_targets)))
        for t in cfg.thresholds:
            metrics.class_counts[(name, t)] = [len(greedy_match(sub, t)), len(cls_targets)]
    return metrics


class MetricsReport:
    """Cumul des compteurs et metriques derivees"""

    def __init__(self, thresholds: Seq[float] = (0.4, 0.7)):
        self.thresholds = tuple(thresholds)
        self.totals = FrameMetrics(
            counts={t: [0, 0, 0] for t in self.thresholds},
            class_counts={(c, t): [0, 0] for c in CLASS_NAMES for t in self.thresholds},
        )
        self.frames = 0

    def add(self, frame_metrics: FrameMetrics) -> None:
        self.frames += 1
        for t, values in frame_metrics.counts.items():
            acc = self.totals.counts.setdefault(t, [0, 0, 0])
            for k in range(3):
                acc[k] += values[k]
        for key, values in frame_metrics.class_counts.items():
            acc = self.totals.class_counts.setdefault(key, [0, 0])
            acc[0] += values[0]
            acc[1] += values[1]
        self.totals.predictions += frame_metrics.predictions
        self.totals.unmatched += frame_metrics.unmatched

    def tp_fp_fn(self, t: float) -> Tuple[int, int, int]:
        return tuple(self.totals.counts.get(t, [0, 0, 0]))

    def precision(self, t: float) -> float:
        tp, fp, _ = self.tp_fp_fn(t)
        return tp / (tp + fp) if tp + fp else 0.0

    def recall(self, t: float) -> float:
        tp, _, fn = self.tp_fp_fn(t)
        return tp / (tp + fn) if tp + fn else 0.0

    def f1(self, t: float) -> float:
        p, r = self.precision(t), self.recall(t)
        return 2 * p * r / (p + r) if p + r else 0.0

    def class_recall(self, name: str, t: float) -> float:
        tp, total = self.totals.class_counts.get((name, t), [0, 0])
        return tp / total if total else 0.0

    @property
    def ufp_percent(self) -> float:
        n = self.totals.predictions
        return 100.0 * self.totals.unmatched / n if n else 0.0

    def rows(self) -> List[List[str]]:
        """Lignes CSV (format fixe .4f)"""
        out = [["threshold", "precision", "recall", "f1", "tp", "fp", "fn", "ufp"]]
        for t in self.thresholds:
            tp, fp, fn = self.tp_fp_fn(t)
            out.append([f"{t:.4f}", f"{self.precision(t):.4f}", f"{self.recall(t):.4f}",
                        f"{self.f1(t):.4f}", str(tp), str(fp), str(fn), f"{self.ufp_percent:.4f}"])
        out.append(["class", "threshold", "recall", "gt"])
        for name in CLASS_NAMES:
            for t in self.thresholds:
                out.append([name, f"{t:.4f}", f"{self.class_recall(name, t):.4f}",
                            str(self.totals.class_counts.get((name, t), [0, 0])[1])])
        return out


def aggregate(stream: Iterable[FrameMetrics], thresholds: Seq[float] = (0.4, 0.7)) -> MetricsReport:
    """Somme les compteurs d'un flux de frames"""
    report = MetricsReport(thresholds)
    for metrics in stream:
        report.add(metrics)
    return report


def per_class_oracle(preds: Seq[Box3D], frame: FilteredFrame, cfg: EvalConfig) -> Tuple[Dict[Tuple[str, float], float], float]:
    """
    Rappel par classe (classe heritee par recouvrement 3D > 0) et uFP d'une frame

    Returns:
        ({(classe, seuil): rappel}, uFP en pourcentage)
    """
    report = MetricsReport(cfg.thresholds)
    report.add(match_and_score(preds, frame, cfg))
    recalls = {(name, t): report.class_recall(name, t) for name in CLASS_NAMES for t in cfg.thresholds}
    return recalls, report.ufp_percent
