"""
Dataset - Sequences, frames filtrees et graphes
================================================

Decouvre les dossiers de sequences, filtre leurs frames en parallele et
construit les graphes de mouvement pour l'entrainement et l'etiquetage.

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence as Seq, Tuple, Union

from core.errors import DataError
from core.graphbuild import FeatureConfig, MotionGraph, build_graph
from core.preprocess import FilterConfig, FilteredFrame, FilterStats, FilteringReport, filter_sequence_frame, report_frame
from core.scene import Sequence
from core.scene_io import frame_filename, read_sequence, render_filtered_frame
from pipelines.frame_executor import FrameExecutor

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def list_sequences(root: PathLike) -> List[Path]:
    """
    Dossiers de sequences sous root (ou root lui-meme s'il contient un manifest)

    Raises:
        DataError: aucun dossier de sequence trouve
    """
    root = Path(root)
    if (root / "manifest").is_file():
        return [root]
    if not root.is_dir():
        raise DataError(f"sequence directory not found: {root}")
    found = sorted(p for p in root.iterdir() if (p / "manifest").is_file())
    if not found:
        raise DataError(f"no sequence (directory with a manifest) under {root}")
    return found


def load_sequence(path: PathLike) -> Sequence:
    seq = read_sequence(path)
    logger.debug("[Dataset] %s: %d frames, seed %d", Path(path).name, len(seq), seq.seed)
    return seq


def frame_indices(num_frames: int, stride: int = 1) -> List[int]:
    return list(range(0, num_frames, max(1, stride)))


def filter_sequence(seq: Sequence, cfg: FilterConfig, executor: FrameExecutor,
                    stride: int = 1) -> Tuple[List[FilteredFrame], FilterStats]:
    """
    Filtre les frames d'une sequence (une frame sur `stride`)

    Returns:
        (frames filtrees dans l'ordre, compteurs cumules)
    """
    indices = frame_indices(len(seq), stride)

    def job(t: int) -> Tuple[FilteredFrame, FilterStats]:
        local = FilterStats()
        return filter_sequence_frame(seq, t, cfg, local), local

    results = executor.map(job, indices, [f"frame {t}" for t in indices])
    stats = FilterStats()
    for _, local in results:
        stats.add(local)
    if stats.empty_reference:
        logger.warning("[Preprocess] [WARN] %d frame(s) without a Chamfer reference", stats.empty_reference)
    return [frame for frame, _ in results], stats


def preprocess_sequence(seq_dir: PathLike, out_dir: PathLike, cfg: FilterConfig, executor: FrameExecutor,
                        report: Optional[FilteringReport] = None) -> FilterStats:
    """
    Ecrit les frames filtrees d'une sequence (frame_<idx> avec ORIGIN et TRAJ)

    Args:
        seq_dir: Dossier de la sequence brute
        out_dir: Dossier de sortie
        cfg: Parametres de filtrage
        executor: Pool de jobs
        report: Rapport de filtrage a completer (optionnel)
    """
    seq = load_sequence(seq_dir)
    frames, stats = filter_sequence(seq, cfg, executor)
    out_dir = Path(out_dir)
    executor.write_files([(out_dir / frame_filename(f.frame_index), render_filtered_frame(f)) for f in frames])
    if report is not None:
        for frame in frames:
            report_frame(report, seq.frames[frame.frame_index], frame)
    logger.info(
        "[Preprocess] %s: %d frames, %d -> %d points",
        Path(seq_dir).name, stats.frames, stats.raw_points, stats.after_static,
    )
    return stats


def build_graphs(frames: Seq[FilteredFrame], cfg: FeatureConfig, executor: FrameExecutor) -> List[MotionGraph]:
    return executor.map(lambda frame: build_graph(frame, cfg), list(frames),
                        [f"frame {f.frame_index}" for f in frames])


def graph_dataset(seq_dirs: Seq[PathLike], filter_cfg: FilterConfig, feature_cfg: FeatureConfig,
                  executor: FrameExecutor, stride: int = 1) -> List[MotionGraph]:
    """
    Graphes etiquetes de plusieurs sequences, dans l'ordre (sequence, frame)

    Les graphes sans arete sont ignores (rien a apprendre).
    """
    graphs: List[MotionGraph] = []
    for seq_dir in seq_dirs:
        seq = load_sequence(seq_dir)
        frames, _ = filter_sequence(seq, filter_cfg, executor, stride)
        graphs.extend(g for g in build_graphs(frames, feature_cfg, executor) if g.num_edges)
    logger.info("[Dataset] %d graphs from %d sequence(s)", len(graphs), len(seq_dirs))
    return graphs


def label_filename(index: int) -> str:
    return frame_filename(index) + ".txt"


def paired_dirs(in_root: PathLike, out_root: PathLike) -> List[Tuple[Path, Path]]:
    """
    (sequence, dossier de labels) pour chaque sequence de in_root

    Une sequence seule ecrit directement dans out_root; un dossier de
    sequences ecrit dans out_root/<nom de sequence>.
    """
    in_root, out_root = Path(in_root), Path(out_root)
    seq_dirs = list_sequences(in_root)
    if seq_dirs == [in_root]:
        return [(in_root, out_root)]
    return [(seq_dir, out_root / seq_dir.name) for seq_dir in seq_dirs]
