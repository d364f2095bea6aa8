"""
Baseline Runner - Pseudo-labels DBSCAN / DBSCAN++
==================================================

Meme chaine que le labeler, la segmentation apprise remplacee par les
baselines densite. Meme format de fichiers de labels.

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
from pathlib import Path
from typing import List, Tuple, Union

from core.baselines import baseline_summary, dbscan_plus, labels_from_result
from core.boxes import PseudoLabel, render_labels
from core.cluster import SegmentationResult
from core.config import RunConfig
from pipelines.dataset import filter_sequence, label_filename, load_sequence, paired_dirs
from pipelines.frame_executor import FrameExecutor

logger = logging.getLogger(__name__)


def run_baseline(in_root: Union[str, Path], out_root: Union[str, Path], cfg: RunConfig,
                 executor: FrameExecutor) -> int:
    """
    Ecrit les pseudo-labels baseline (cfg.baseline) de chaque sequence

    Returns:
        Nombre total de pseudo-labels ecrits
    """
    total = 0
    for seq_dir, out_dir in paired_dirs(in_root, out_root):
        seq = load_sequence(seq_dir)
        frames, _ = filter_sequence(seq, cfg.filter, executor)

        def job(frame) -> Tuple[List[PseudoLabel], SegmentationResult]:
            result = dbscan_plus(frame, cfg.baseline)
            return labels_from_result(frame, result, cfg.baseline, cfg.boxes), result

        results = executor.map(job, frames, [f"{seq_dir.name} frame {f.frame_index}" for f in frames])
        executor.write_files(
            [(out_dir / label_filename(f.frame_index), render_labels(labs)) for f, (labs, _) in zip(frames, results)]
        )
        summary = baseline_summary([seg for _, seg in results])
        count = sum(len(labs) for labs, _ in results)
        total += count
        logger.info(
            "[Baseline] %s %s: %d clusters, %d unassigned points, %d pseudo-labels",
            cfg.baseline.display_name, seq_dir.name, summary["clusters"], summary["unassigned"], count,
        )
    return total
