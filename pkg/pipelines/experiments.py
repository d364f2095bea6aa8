"""
Experiments - Tableaux d'ablation et de comparaison
====================================================

Chaque tableau lance un balayage sur les donnees synthetiques et renvoie des
lignes (CSV + tableau texte). Les memes config et graine donnent des
rapports identiques octet pour octet.

Tableaux:
- t1_graph_ablation: espace kNN, attributs de noeuds / d'aretes (+ plafond oracle)
- t2_inflation: boites gonflees ou non, SegIoU et 3DIoU (scene a dominante pietonne)
- t3_pseudo_quality: MPN vs DBSCAN*, trajectoires oracle / bruitees,
  rappel par classe, uFP, volume de donnees d'entrainement
- t8_oracle: extraction oracle avec x_f in {2, 30, 50}

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence as Seq, Tuple

from core.baselines import DbscanConfig, baseline_labels
from core.boxes import BoxConfig, PseudoLabel, oracle_extract
from core.config import RunConfig
from core.errors import ConfigError, DataError
from core.evaluation import MetricsReport, aggregate
from core.graphbuild import FeatureConfig, graph_oracle_eval
from core.mpn import MpnModel
from core.preprocess import FilterConfig, FilteredFrame
from core.scene import CLASS_NAMES, SceneConfig, generate_sequence
from core.training import train
from pipelines.dataset import build_graphs, filter_sequence, list_sequences, load_sequence
from pipelines.evaluator import score_frames
from pipelines.frame_executor import FrameExecutor
from pipelines.labeler import label_frame
from pipelines.reports import gnuplot_script, render_csv, render_table, write_text
from pipelines.splits import MANIFEST_NAME, read_split_manifest, split_dataset

logger = logging.getLogger(__name__)

LEARNED = "MPN"
NOISY_SIGMA = 0.3
NOISY_OUTLIERS = 0.1
ORACLE_XF = (2, 30, 50)
SCALING_PERCENTS = (10, 50, 90)
PEDESTRIAN_HEAVY = 8
PEDESTRIAN_SEED_BASE = 100_000
METRIC_HEADER = ["iou", "threshold", "precision", "recall", "f1"]

Row = List[str]


@dataclass
class ExperimentResult:
    """Lignes d'un tableau, prets pour CSV / texte / gnuplot"""

    table: str
    rows: List[Row]
    label_column: int = 1
    value_columns: Tuple[int, ...] = ()
    value_names: Tuple[str, ...] = ()
    plot_rows: int = 0


def metric_cells(report: MetricsReport, iou_kind: str, t: float) -> Row:
    return [iou_kind, f"{t:.2f}", f"{report.precision(t):.4f}", f"{report.recall(t):.4f}", f"{report.f1(t):.4f}"]


@dataclass
class ExperimentContext:
    """
    Donnees et caches partages par les tableaux

    Les frames filtrees sont mises en cache par (sequence, FilterConfig).
    """

    cfg: RunConfig
    data_root: Path
    executor: FrameExecutor
    seq_dirs: List[Path] = field(default_factory=list)
    splits: Optional[Dict[str, List[Path]]] = None
    _frames: Dict[Tuple[object, FilterConfig, int], List[FilteredFrame]] = field(default_factory=dict)

    @classmethod
    def open(cls, cfg: RunConfig, data_root, executor: FrameExecutor) -> "ExperimentContext":
        """
        Raises:
            DataError: pas de sequences sous data_root
        """
        data_root = Path(data_root)
        return cls(cfg=cfg, data_root=data_root, executor=executor, seq_dirs=list_sequences(data_root))

    def _load_splits(self) -> Dict[str, List[Path]]:
        """Manifest de splits de data_root, sinon partition calculee avec run.seed"""
        by_name = {p.name: p for p in self.seq_dirs}
        manifest = self.data_root / MANIFEST_NAME
        if manifest.is_file():
            names = read_split_manifest(manifest)
        else:
            names = split_dataset(list(by_name), self.cfg.run.fractions(), self.cfg.run.seed)
        splits = {}
        for split, members in names.items():
            missing = [n for n in members if n not in by_name]
            if missing:
                raise DataError(f"split {split} lists unknown sequence(s): {', '.join(missing)}")
            splits[split] = [by_name[n] for n in members]
        return splits

    def split(self, name: str) -> List[Path]:
        if self.splits is None:
            self.splits = self._load_splits()
        members = self.splits.get(name, [])
        if not members:
            raise DataError(f"split {name} is empty; generate more sequences or adjust run.{name}")
        return members

    def frames(self, seq_dirs: Seq[Path], filter_cfg: FilterConfig, stride: int = 1) -> List[FilteredFrame]:
        out: List[FilteredFrame] = []
        for seq_dir in seq_dirs:
            key = (seq_dir, filter_cfg, stride)
            if key not in self._frames:
                seq = load_sequence(seq_dir)
                self._frames[key], _ = filter_sequence(seq, filter_cfg, self.executor, stride)
            out.extend(self._frames[key])
        return out

    def generated_frames(self, scene_cfg: SceneConfig, seeds: Seq[int], filter_cfg: FilterConfig,
                         stride: int = 1) -> List[FilteredFrame]:
        """Frames filtrees de sequences generees en memoire (une par graine)"""
        out: List[FilteredFrame] = []
        for seed in seeds:
            key = (("generated", scene_cfg, seed), filter_cfg, stride)
            if key not in self._frames:
                seq = generate_sequence(scene_cfg, seed)
                self._frames[key], _ = filter_sequence(seq, filter_cfg, self.executor, stride)
            out.extend(self._frames[key])
        return out

    def train_model(self, seq_dirs: Seq[Path], filter_cfg: FilterConfig, feature_cfg: FeatureConfig) -> MpnModel:
        """Entraine un modele sur les graphes des sequences (une frame sur train.frame_stride)"""
        return self.train_on_frames(self.frames(seq_dirs, filter_cfg, self.cfg.train.frame_stride), feature_cfg)

    def train_on_frames(self, frames: Seq[FilteredFrame], feature_cfg: FeatureConfig) -> MpnModel:
        graphs = [g for g in build_graphs(frames, feature_cfg, self.executor) if g.num_edges]
        if not graphs:
            raise DataError("no training graph with edges; check the scene and filter settings")
        model = MpnModel(feature_cfg.node_dim, feature_cfg.edge_dim, self.cfg.mpn, metadata=feature_cfg.echo())
        train(model, graphs, self.cfg.train)
        return model

    def model_labels(self, model: MpnModel, frames: Seq[FilteredFrame], feature_cfg: FeatureConfig,
                      box_cfg: Optional[BoxConfig] = None) -> List[List[PseudoLabel]]:
        box_cfg = box_cfg or self.cfg.boxes
        return self.executor.map(
            lambda frame: label_frame(model, frame, feature_cfg, self.cfg.cluster, box_cfg),
            list(frames), [f"frame {f.frame_index}" for f in frames],
        )

    def map_labels(self, fn: Callable[[FilteredFrame], List[PseudoLabel]],
                   frames: Seq[FilteredFrame]) -> List[List[PseudoLabel]]:
        return self.executor.map(fn, list(frames), [f"frame {f.frame_index}" for f in frames])

    def score(self, frames: Seq[FilteredFrame], predictions: Seq[Seq[PseudoLabel]],
              iou_kind: str) -> MetricsReport:
        eval_cfg = replace(self.cfg.eval, iou_kind=iou_kind)
        return aggregate(score_frames(frames, predictions, eval_cfg, self.executor), eval_cfg.thresholds)


def noisy_filter(cfg: FilterConfig) -> FilterConfig:
    """Trajectoires oracle corrompues (reglages de la config s'ils sont non nuls)"""
    return replace(
        cfg,
        trajectory_source="noisy-oracle",
        traj_sigma=cfg.traj_sigma or NOISY_SIGMA,
        traj_outlier_fraction=cfg.traj_outlier_fraction or NOISY_OUTLIERS,
    )


def oracle_filter(cfg: FilterConfig) -> FilterConfig:
    return replace(cfg, trajectory_source="oracle", traj_sigma=0.0, traj_outlier_fraction=0.0)


def graph_variants(base: FeatureConfig) -> List[Tuple[str, FeatureConfig]]:
    """Lignes de l'ablation du graphe (sans doublon)"""
    candidates = [
        ("knn", replace(base, knn_space="position")),
        ("knn", replace(base, knn_space="velocity")),
        ("knn", replace(base, knn_space="position_velocity_cut")),
        ("node", replace(base, knn_space="position", node_variant="velocity")),
        ("node", replace(base, knn_space="position", node_variant="position")),
        ("node", replace(base, knn_space="position", node_variant="both")),
        ("node", replace(base, knn_space="position", node_variant="scene_flow")),
        ("edge", replace(base, knn_space="position", node_variant="both", edge_variant="velocity")),
        ("edge", replace(base, knn_space="position", node_variant="both", edge_variant="position")),
        ("edge", replace(base, knn_space="position", node_variant="both", edge_variant="both")),
    ]
    seen = set()
    out = []
    for axis, variant in candidates:
        if variant in seen:
            continue
        seen.add(variant)
        out.append((axis, variant))
    return out


def t1_graph_ablation(ctx: ExperimentContext) -> ExperimentResult:
    """Construction du graphe et attributs: F1 SegIoU apres entrainement et plafond oracle"""
    cfg = ctx.cfg
    thresholds = cfg.eval.thresholds
    header = ["axis", "knn_space", "node", "edge"]
    header += [f"oracle_f1@{t:.2f}" for t in thresholds] + [f"f1@{t:.2f}" for t in thresholds]
    rows: List[Row] = [header]
    train_dirs, val_dirs = ctx.split("train_pseudo"), ctx.split("val_pseudo")
    val_frames = ctx.frames(val_dirs, cfg.filter)
    seg_eval = replace(cfg.eval, iou_kind="seg")

    for axis, feature_cfg in graph_variants(cfg.graph):
        oracle = MetricsReport(thresholds)
        graphs = build_graphs(val_frames, feature_cfg, ctx.executor)
        for graph, frame in zip(graphs, val_frames):
            oracle.add(graph_oracle_eval(graph, frame, cfg.cluster, cfg.boxes, seg_eval).totals)
        model = ctx.train_model(train_dirs, cfg.filter, feature_cfg)
        report = ctx.score(val_frames, ctx.model_labels(model, val_frames, feature_cfg), "seg")
        rows.append(
            [axis, feature_cfg.knn_space, feature_cfg.node_variant, feature_cfg.edge_variant]
            + [f"{oracle.f1(t):.4f}" for t in thresholds]
            + [f"{report.f1(t):.4f}" for t in thresholds]
        )
        logger.info("[Experiment] t1 %s/%s/%s F1@%.2f=%.4f", feature_cfg.knn_space, feature_cfg.node_variant,
                    feature_cfg.edge_variant, thresholds[0], report.f1(thresholds[0]))
    n = len(thresholds)
    return ExperimentResult(
        "t1_graph_ablation", rows, label_column=3,
        value_columns=tuple(range(5 + n, 5 + 2 * n)),
        value_names=tuple(f"F1@{t:.2f}" for t in thresholds),
    )


def pedestrian_scene(cfg: SceneConfig) -> SceneConfig:
    """Variante a dominante pietonne de la scene du run"""
    return replace(
        cfg,
        num_vehicles=min(cfg.num_vehicles, 1),
        num_cyclists=min(cfg.num_cyclists, 1),
        num_pedestrians=max(cfg.num_pedestrians, PEDESTRIAN_HEAVY),
    )


def t2_inflation(ctx: ExperimentContext) -> ExperimentResult:
    """
    Gonflage des boites: effet sur SegIoU et 3DIoU

    Sequences pietonnes generees a part (graines PEDESTRIAN_SEED_BASE + run.seed + i),
    autant que dans train_pseudo puis val_pseudo.
    """
    cfg = ctx.cfg
    rows: List[Row] = [["method", "inflation"] + METRIC_HEADER]
    scene = pedestrian_scene(cfg.scene)
    n_train, n_val = len(ctx.split("train_pseudo")), len(ctx.split("val_pseudo"))
    base = PEDESTRIAN_SEED_BASE + cfg.run.seed
    train_frames = ctx.generated_frames(scene, list(range(base, base + n_train)), cfg.filter,
                                        cfg.train.frame_stride)
    val_frames = ctx.generated_frames(scene, list(range(base + n_train, base + n_train + n_val)), cfg.filter)
    model = ctx.train_on_frames(train_frames, cfg.graph)
    profile = cfg.boxes.profile if cfg.boxes.profile != "none" else "waymo"
    for setting, box_cfg in (("off", replace(cfg.boxes, profile="none")),
                             ("on", replace(cfg.boxes, profile=profile))):
        preds = ctx.model_labels(model, val_frames, cfg.graph, box_cfg)
        for iou_kind in ("seg", "box3d"):
            report = ctx.score(val_frames, preds, iou_kind)
            for t in cfg.eval.thresholds:
                rows.append([LEARNED, setting] + metric_cells(report, iou_kind, t))
    return ExperimentResult("t2_inflation", rows, label_column=2, value_columns=(7,), value_names=("F1",))


def baseline_variants(base: DbscanConfig) -> List[Tuple[str, DbscanConfig]]:
    variants = [
        replace(base, variant="vanilla", size_filter=True),
        replace(base, variant="plus", size_filter=False),
        replace(base, variant="plus", size_filter=True),
        replace(base, variant="plus_long", size_filter=True),
    ]
    out = [(v.display_name, v) for v in variants]
    out.append((replace(base, variant="plus", size_filter=True).display_name + "(min1)",
                replace(base, variant="plus", size_filter=True, min_samples_intersection=1)))
    return out


def _class_rows(method: str, source: str, frames, preds, ctx: ExperimentContext) -> List[Row]:
    rows = []
    for iou_kind in ("seg", "box3d"):
        report = ctx.score(frames, preds, iou_kind)
        for name in CLASS_NAMES:
            for t in ctx.cfg.eval.thresholds:
                rows.append([method, source, iou_kind, name, f"{t:.2f}", f"{report.class_recall(name, t):.4f}",
                             f"{report.ufp_percent:.4f}"])
    return rows


def t3_pseudo_quality(ctx: ExperimentContext) -> ExperimentResult:
    """Modele appris contre les baselines densite, trajectoires oracle puis bruitees"""
    cfg = ctx.cfg
    train_dirs, val_dirs = ctx.split("train_pseudo"), ctx.split("val_pseudo")
    rows: List[Row] = [["method", "trajectories"] + METRIC_HEADER + ["ufp"]]
    class_rows: List[Row] = [["method", "trajectories", "iou", "class", "threshold", "recall", "ufp"]]
    dagger = replace(cfg.baseline, variant="plus", size_filter=True).display_name

    for source, filter_cfg in (("oracle", oracle_filter(cfg.filter)), ("noisy", noisy_filter(cfg.filter))):
        val_frames = ctx.frames(val_dirs, filter_cfg)
        methods: List[Tuple[str, List[List[PseudoLabel]]]] = []
        model = ctx.train_model(train_dirs, filter_cfg, cfg.graph)
        methods.append((LEARNED, ctx.model_labels(model, val_frames, cfg.graph)))
        for name, base_cfg in baseline_variants(cfg.baseline):
            methods.append((name, ctx.map_labels(
                lambda frame, b=base_cfg: baseline_labels(frame, b, cfg.boxes), val_frames)))
        if source == "noisy":
            for percent in SCALING_PERCENTS:
                count = max(1, math.ceil(len(train_dirs) * percent / 100))
                scaled = ctx.train_model(train_dirs[:count], filter_cfg, cfg.graph)
                methods.append((f"{LEARNED}^{percent}", ctx.model_labels(scaled, val_frames, cfg.graph)))

        for method, preds in methods:
            for iou_kind in ("seg", "box3d"):
                report = ctx.score(val_frames, preds, iou_kind)
                for t in cfg.eval.thresholds:
                    rows.append([method, source] + metric_cells(report, iou_kind, t) + [f"{report.ufp_percent:.4f}"])
            if method in (LEARNED, dagger):
                class_rows += _class_rows(method, source, val_frames, preds, ctx)
            logger.info("[Experiment] t3 %s %s done", method, source)
    return ExperimentResult("t3_pseudo_quality", rows + [[]] + class_rows, label_column=1, plot_rows=len(rows) - 1,
                            value_columns=(7,), value_names=("F1",))


def t8_oracle(ctx: ExperimentContext) -> ExperimentResult:
    """Extraction oracle: plafond selon le nombre minimal de points interieurs x_f"""
    cfg = ctx.cfg
    frames = ctx.frames(ctx.seq_dirs, cfg.filter)
    rows: List[Row] = [["x_f"] + METRIC_HEADER]
    for x_f in ORACLE_XF:
        preds = ctx.map_labels(lambda frame, x=x_f: oracle_extract(frame, x, cfg.boxes), frames)
        for iou_kind in ("seg", "box3d"):
            report = ctx.score(frames, preds, iou_kind)
            for t in cfg.eval.thresholds:
                rows.append([str(x_f)] + metric_cells(report, iou_kind, t))
    return ExperimentResult("t8_oracle", rows, label_column=1, value_columns=(4, 5), value_names=("precision", "recall"))


TABLES: Dict[str, Callable[[ExperimentContext], ExperimentResult]] = {
    "t1_graph_ablation": t1_graph_ablation,
    "t2_inflation": t2_inflation,
    "t3_pseudo_quality": t3_pseudo_quality,
    "t8_oracle": t8_oracle,
}


def resolve_table(name: str) -> str:
    """Nom complet du tableau ("t3" -> "t3_pseudo_quality")"""
    key = name.lower().strip()
    for table in TABLES:
        if key == table or key == table.split("_", 1)[0]:
            return table
    raise ConfigError(f"unknown experiment table {name!r}; available: {', '.join(TABLES)}")


def write_experiment(result: ExperimentResult, out_dir, gnuplot: bool = False) -> List[Path]:
    """Ecrit <table>.csv, <table>.txt et, si demande, <table>.gp"""
    out_dir = Path(out_dir)
    csv_name = f"{result.table}.csv"
    paths = [
        write_text(out_dir / csv_name, render_csv(result.rows)),
        write_text(out_dir / f"{result.table}.txt", render_table(result.rows)),
    ]
    if gnuplot and result.value_columns:
        script = gnuplot_script(result.table, csv_name, result.label_column, result.value_columns,
                                result.value_names, result.plot_rows)
        paths.append(write_text(out_dir / f"{result.table}.gp", script))
    return paths
