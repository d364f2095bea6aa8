"""
Evaluator - Evaluation de fichiers de pseudo-labels
====================================================

Relit les labels d'un dossier de predictions et les compare a la verite
terrain des sequences (frames filtrees pour SegIoU et points interieurs).

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
from pathlib import Path
from typing import List, Sequence as Seq, Union

from core.boxes import PseudoLabel, read_labels
from core.config import RunConfig
from core.errors import DataError
from core.evaluation import EvalConfig, FrameMetrics, MetricsReport, aggregate, match_and_score
from core.preprocess import FilteredFrame
from pipelines.dataset import filter_sequence, label_filename, load_sequence, paired_dirs
from pipelines.frame_executor import FrameExecutor

logger = logging.getLogger(__name__)


def score_frames(frames: Seq[FilteredFrame], predictions: Seq[Seq[PseudoLabel]], cfg: EvalConfig,
                 executor: FrameExecutor) -> List[FrameMetrics]:
    """Metriques par frame, dans l'ordre des frames"""
    if len(frames) != len(predictions):
        raise DataError(f"{len(predictions)} prediction sets for {len(frames)} frames")
    pairs = list(zip(frames, predictions))
    return executor.map(
        lambda pair: match_and_score([lab.box for lab in pair[1]], pair[0], cfg),
        pairs,
        [f"frame {f.frame_index}" for f in frames],
    )


def evaluate_labels(pred_root: Union[str, Path], gt_root: Union[str, Path], cfg: RunConfig,
                    executor: FrameExecutor) -> MetricsReport:
    """
    Evalue un dossier de labels contre une sequence (ou un dossier de sequences)

    Raises:
        DataError: fichier de labels manquant pour une frame
    """
    stream: List[FrameMetrics] = []
    for seq_dir, pred_dir in paired_dirs(gt_root, pred_root):
        seq = load_sequence(seq_dir)
        frames, _ = filter_sequence(seq, cfg.filter, executor)
        predictions = []
        for frame in frames:
            path = pred_dir / label_filename(frame.frame_index)
            if not path.is_file():
                raise DataError(f"{seq_dir.name} frame {frame.frame_index}: missing label file {path}")
            predictions.append(read_labels(path))
        stream.extend(score_frames(frames, predictions, cfg.eval, executor))
    report = aggregate(stream, cfg.eval.thresholds)
    for t in cfg.eval.thresholds:
        logger.info(
            "[Eval] %s IoU T=%.2f: P=%.4f R=%.4f F1=%.4f",
            cfg.eval.iou_kind, t, report.precision(t), report.recall(t), report.f1(t),
        )
    return report
