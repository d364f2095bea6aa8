"""
Labeler - Pseudo-labels d'un modele entraine
=============================================

Par frame: filtrage -> graphe -> scores d'aretes -> partition -> boites
gonflees. Un fichier de labels par frame (`frame_<idx>.txt`, lignes
`cx cy cz l w h yaw score`), vide si la frame ne contient aucun objet.

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
from pathlib import Path
from typing import Dict, List, Union

from core.boxes import BoxConfig, PseudoLabel, boxes_from_segmentation, render_labels
from core.cluster import ClusterConfig, segment
from core.config import RunConfig
from core.errors import ShapeError
from core.graphbuild import FeatureConfig, build_graph
from core.mpn import MpnModel
from core.preprocess import FilteredFrame
from pipelines.dataset import filter_sequence, label_filename, load_sequence, paired_dirs
from pipelines.frame_executor import FrameExecutor

logger = logging.getLogger(__name__)


def model_features(model: MpnModel) -> FeatureConfig:
    """Config des attributs enregistree avec le modele"""
    feature_cfg = FeatureConfig.from_echo(model.metadata)
    if (feature_cfg.node_dim, feature_cfg.edge_dim) != (model.node_dim, model.edge_dim):
        raise ShapeError(
            f"model expects D_node={model.node_dim}, D_edge={model.edge_dim} but its feature "
            f"metadata gives D_node={feature_cfg.node_dim}, D_edge={feature_cfg.edge_dim}"
        )
    return feature_cfg


def label_frame(model: MpnModel, frame: FilteredFrame, feature_cfg: FeatureConfig,
                cluster_cfg: ClusterConfig, box_cfg: BoxConfig) -> List[PseudoLabel]:
    """Pseudo-labels d'une frame filtree"""
    graph = build_graph(frame, feature_cfg)
    if graph.num_edges == 0:
        return []
    scores = model.predict(graph)
    result = segment(graph.num_nodes, graph.edge_index, scores, cluster_cfg)
    return boxes_from_segmentation(frame, result, box_cfg)


def label_sequence(model: MpnModel, seq_dir: Union[str, Path], out_dir: Union[str, Path],
                   cfg: RunConfig, executor: FrameExecutor) -> Dict[int, List[PseudoLabel]]:
    """
    Etiquette toutes les frames d'une sequence

    Returns:
        {index de frame: pseudo-labels}
    """
    feature_cfg = model_features(model)
    seq = load_sequence(seq_dir)
    frames, _ = filter_sequence(seq, cfg.filter, executor)
    labels = executor.map(
        lambda frame: label_frame(model, frame, feature_cfg, cfg.cluster, cfg.boxes),
        frames,
        [f"{Path(seq_dir).name} frame {f.frame_index}" for f in frames],
    )
    out_dir = Path(out_dir)
    executor.write_files(
        [(out_dir / label_filename(f.frame_index), render_labels(labs)) for f, labs in zip(frames, labels)]
    )
    total = sum(len(labs) for labs in labels)
    logger.info("[Labeler] %s: %d frames, %d pseudo-labels", Path(seq_dir).name, len(frames), total)
    return {f.frame_index: labs for f, labs in zip(frames, labels)}


def label_frames(model: MpnModel, in_root: Union[str, Path], out_root: Union[str, Path],
                 cfg: RunConfig, executor: FrameExecutor) -> int:
    """
    Etiquette une sequence ou un dossier de sequences

    Returns:
        Nombre total de pseudo-labels ecrits
    """
    total = 0
    for seq_dir, out_dir in paired_dirs(in_root, out_root):
        per_frame = label_sequence(model, seq_dir, out_dir, cfg, executor)
        total += sum(len(labs) for labs in per_frame.values())
    return total
