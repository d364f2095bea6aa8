#!/usr/bin/env python3
"""
MOTION CLUSTER - Pseudo-labels d'objets mobiles par passage de messages
========================================================================

Point d'entree unique de la chaine complete sur sequences synthetiques:
- gen: generation de sequences Lidar synthetiques
- split: partition des sequences (train_pseudo / train_det / val_pseudo / val_det)
- preprocess: frames filtrees (+ rapport de filtrage)
- train: entrainement du classifieur d'aretes
- label / baseline: pseudo-labels (modele appris ou DBSCAN*)
- eval: precision / rappel / F1 des pseudo-labels
- experiment: tableaux d'ablation et de comparaison
- dump-config / history: configuration effective, journal des runs

Codes de sortie: 0 succes, 2 config, 3 donnees, 4 numerique.

Author: Motion Cluster System
Date: 2025-11-24
"""

import argparse
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Optional

from dotenv import load_dotenv

from core.config import RunConfig, config_digest, dump_config, load_config
from core.errors import ConfigError, DataError, MotionClusterError
from core.model_io import load_model, save_model
from core.mpn import MpnModel
from core.preprocess import FilteringReport
from core.resource_profile import ResourceProfile
from core.run_ledger import RunLedger
from core.scene import generate_sequence
from core.scene_io import write_sequence
from core.training import train
from experiment_router import ExperimentRouter
from pipelines.baseline_runner import run_baseline
from pipelines.dataset import graph_dataset, list_sequences, paired_dirs, preprocess_sequence
from pipelines.evaluator import evaluate_labels
from pipelines.frame_executor import FrameExecutor
from pipelines.labeler import label_frames
from pipelines.reports import render_csv, render_table, write_text
from pipelines.splits import MANIFEST_NAME, read_split_manifest, split_dataset, write_split_manifest

logger = logging.getLogger("motion_cluster")

BANNER = "=" * 70
LONG_COMMANDS = ("gen", "preprocess", "train", "label", "baseline", "eval", "experiment")
EVAL_MODES = {"moving": "moving_only", "all": "all_with_ignore"}


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
        force=True,
    )


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="fichier de config (section.key = value)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="surcharge une cle (repetable)")
    common.add_argument("--seed", type=int, help="graine globale (run.seed)")
    common.add_argument("--jobs", type=int, help="jobs par frame (run.jobs, 0 = auto)")
    common.add_argument("--verbose", action="store_true", help="logs DEBUG")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="motion_cluster", description="Motion Cluster - pseudo-labels Lidar")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="genere des sequences synthetiques")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, help="N sequences seq_0000..seq_{N-1} (graines seed, seed+1, ...)")

    p = sub.add_parser("split", parents=[common], help="partitionne les sequences")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", help=f"manifest (defaut: <in>/{MANIFEST_NAME})")

    p = sub.add_parser("preprocess", parents=[common], help="ecrit les frames filtrees")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="CSV du rapport de filtrage")

    p = sub.add_parser("train", parents=[common], help="entraine le classifieur d'aretes")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="fichier modele")
    p.add_argument("--val", help="sequences de validation (journalisation par epoque)")
    p.add_argument("--split", help="n'utiliser que ce jeu du manifest de splits de --in")

    p = sub.add_parser("label", parents=[common], help="pseudo-labels du modele")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--profile", help="profil de gonflage (boxes.profile)")

    p = sub.add_parser("baseline", parents=[common], help="pseudo-labels DBSCAN / DBSCAN++")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=("vanilla", "plus", "plus_long"))
    p.add_argument("--size-filter", dest="size_filter", action=argparse.BooleanOptionalAction, default=None)

    p = sub.add_parser("eval", parents=[common], help="evalue des pseudo-labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--iou", choices=("seg", "box3d"))
    p.add_argument("--mode", choices=tuple(EVAL_MODES))
    p.add_argument("--report", help="CSV des metriques")

    p = sub.add_parser("experiment", parents=[common], help="tableaux d'experience")
    p.add_argument("table", help="t1_graph_ablation | t2_inflation | t3_pseudo_quality | t8_oracle (ou t1, t2, t3, t8)")
    p.add_argument("--data", required=True, help="dossier des sequences")
    p.add_argument("--out", required=True, help="dossier des rapports")
    p.add_argument("--gnuplot", action="store_true", help="ecrit aussi <table>.gp")

    sub.add_parser("dump-config", parents=[common], help="affiche la configuration effective")

    p = sub.add_parser("history", parents=[common], help="runs recents du journal")
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--filter", dest="command_filter", help="commande a filtrer")
    return parser


def collect_overrides(args: argparse.Namespace) -> List[str]:
    """--set puis les options dediees (qui gagnent)"""
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.jobs is not None:
        overrides.append(f"run.jobs={args.jobs}")
    if getattr(args, "profile", None):
        overrides.append(f"boxes.profile={args.profile}")
    if getattr(args, "variant", None):
        overrides.append(f"baseline.variant={args.variant}")
    if getattr(args, "size_filter", None) is not None:
        overrides.append(f"baseline.size_filter={'true' if args.size_filter else 'false'}")
    if getattr(args, "iou", None):
        overrides.append(f"eval.iou_kind={args.iou}")
    if getattr(args, "mode", None):
        overrides.append(f"eval.mode={EVAL_MODES[args.mode]}")
    return overrides


class MotionCluster:
    """
    Execution d'une commande

    Features:
    - Un pool de jobs par frame dimensionne par le profil de ressources
    - Journal des runs (empreinte de config, statut, resume)
    """

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.digest = config_digest(cfg)
        self.resources = ResourceProfile()
        self.jobs = self.resources.resolve_jobs(cfg.run.jobs)
        self.executor = FrameExecutor(self.jobs)
        self.start_time = datetime.now()

    def cmd_gen(self, args) -> str:
        out = Path(args.out)
        seed = self.cfg.run.seed
        if args.count is None:
            jobs = [(seed, out)]
        else:
            if args.count < 1:
                raise ConfigError("--count must be >= 1")
            jobs = [(seed + i, out / f"seq_{i:04d}") for i in range(args.count)]
        self.executor.map(lambda job: write_sequence(generate_sequence(self.cfg.scene, job[0]), job[1]),
                          jobs, [f"sequence {p.name}" for _, p in jobs])
        for s, path in jobs:
            logger.info("  [OK] %s (seed %d, %d frames)", path, s, self.cfg.scene.num_frames)
        return f"{len(jobs)} sequence(s) in {out}"

    def cmd_split(self, args) -> str:
        names = [p.name for p in list_sequences(args.input)]
        splits = split_dataset(names, self.cfg.run.fractions(), self.cfg.run.seed)
        path = write_split_manifest(splits, args.out or Path(args.input) / MANIFEST_NAME)
        for split, members in splits.items():
            logger.info("  %-12s %d sequence(s)", split, len(members))
        return f"manifest {path}"

    def cmd_preprocess(self, args) -> str:
        report = FilteringReport() if args.report else None
        points = 0
        pairs = paired_dirs(args.input, args.out)
        for seq_dir, out_dir in pairs:
            stats = preprocess_sequence(seq_dir, out_dir, self.cfg.filter, self.executor, report)
            points += stats.after_static
        if report is not None:
            write_text(args.report, render_csv(report.rows()))
            logger.info("  static removal: precision %.4f, recall %.4f", report.precision, report.recall)
        return f"{len(pairs)} sequence(s), {points} filtered points"

    def _training_dirs(self, root: str, split: Optional[str]) -> List[Path]:
        seq_dirs = list_sequences(root)
        if split is None:
            return seq_dirs
        members = set(read_split_manifest(Path(root) / MANIFEST_NAME).get(split, []))
        chosen = [p for p in seq_dirs if p.name in members]
        if not chosen:
            raise DataError(f"split {split} has no sequence under {root}")
        return chosen

    def cmd_train(self, args) -> str:
        cfg = self.cfg
        stride = cfg.train.frame_stride
        graphs = graph_dataset(self._training_dirs(args.input, args.split), cfg.filter, cfg.graph,
                               self.executor, stride)
        val = None
        if args.val:
            val = graph_dataset(list_sequences(args.val), cfg.filter, cfg.graph, self.executor, stride)
        model = MpnModel(cfg.graph.node_dim, cfg.graph.edge_dim, cfg.mpn, metadata=cfg.graph.echo())
        logger.info("[Trainer] %d graphs, %d parameters", len(graphs), model.num_parameters)
        result = train(model, graphs, cfg.train, val)
        save_model(model, args.out)
        last = result.history[-1]
        return f"model {args.out}, {result.steps} steps, loss {last.loss:.4f}"

    def cmd_label(self, args) -> str:
        model = load_model(args.model)
        total = label_frames(model, args.input, args.out, self.cfg, self.executor)
        return f"{total} pseudo-labels in {args.out}"

    def cmd_baseline(self, args) -> str:
        total = run_baseline(args.input, args.out, self.cfg, self.executor)
        return f"{self.cfg.baseline.display_name}: {total} pseudo-labels in {args.out}"

    def cmd_eval(self, args) -> str:
        report = evaluate_labels(args.pred, args.gt, self.cfg, self.executor)
        rows = report.rows()
        if args.report:
            write_text(args.report, render_csv(rows))
        print(render_table(rows), end="")
        t = self.cfg.eval.thresholds[0]
        return f"{self.cfg.eval.iou_kind} F1@{t:.2f} = {report.f1(t):.4f}"

    def cmd_experiment(self, args) -> str:
        router = ExperimentRouter.get_instance()
        result, paths = router.run(args.table, args.data, args.out, self.cfg, args.gnuplot)
        print(render_table(result.rows), end="")
        return f"{result.table}: " + ", ".join(p.name for p in paths)

    def handlers(self) -> Dict[str, Callable[[argparse.Namespace], str]]:
        return {
            "gen": self.cmd_gen,
            "split": self.cmd_split,
            "preprocess": self.cmd_preprocess,
            "train": self.cmd_train,
            "label": self.cmd_label,
            "baseline": self.cmd_baseline,
            "eval": self.cmd_eval,
            "experiment": self.cmd_experiment,
        }

    def run(self, command: str, args: argparse.Namespace) -> str:
        long_running = command in LONG_COMMANDS
        if long_running:
            logger.info("\n" + BANNER)
            logger.info("  MOTION CLUSTER - %s", command.upper())
            logger.info(BANNER)
            logger.info("  config %s  seed %d  jobs %d", self.digest[:12], self.cfg.run.seed, self.jobs)
        summary = self.handlers()[command](args)
        if long_running:
            elapsed = (datetime.now() - self.start_time).total_seconds()
            logger.info(BANNER)
            logger.info("  %s (%.1fs)", summary, elapsed)
            self.resources.log_status(self.jobs)
            logger.info(BANNER)
        return summary


def print_history(cfg: RunConfig, days: int, command: Optional[str]) -> None:
    if not cfg.run.ledger:
        print("run ledger disabled (run.ledger is empty)")
        return
    router = ExperimentRouter.get_instance()
    try:
        for run in router.get_history(cfg, days, command):
            print(f"{run['timestamp'][:19]}  {run['command']:<11} {run['status']:<9} "
                  f"{run['config_digest'][:12]}  {run['summary']}")
        stats = router.get_stats(cfg)
        print(f"{stats['runs_count']} run(s), {stats['failed_count']} failed, last {stats['last_activity']}")
    finally:
        router.close()


def record(cfg: RunConfig, command: str, status: str, summary: str, metadata: Dict) -> None:
    if not cfg.run.ledger:
        return
    ledger = RunLedger(cfg.run.ledger)
    try:
        ledger.record_run(command, config_digest(cfg), cfg.run.seed, status, summary, metadata)
    finally:
        ledger.close()


def main(argv: Optional[List[str]] = None) -> int:
    """
    Point d'entree CLI

    Returns:
        Code de sortie (0, 2 config, 3 donnees, 4 numerique, 1 autre)
    """
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    load_dotenv()

    try:
        cfg = load_config(args.config, overrides=collect_overrides(args))
    except MotionClusterError as exc:
        logger.error("[ERROR] %s", exc)
        return exc.exit_code

    if args.command == "dump-config":
        print(dump_config(cfg), end="")
        return 0
    if args.command == "history":
        print_history(cfg, args.days, args.command_filter)
        return 0

    metadata = {k: str(v) for k, v in vars(args).items() if k not in ("overrides", "verbose", "command")}
    status, summary, code = "completed", "", 0
    try:
        summary = MotionCluster(cfg).run(args.command, args)
    except MotionClusterError as exc:
        status, summary, code = "failed", str(exc), exc.exit_code
        logger.error("[ERROR] %s", exc)
    except KeyboardInterrupt:
        status, summary, code = "failed", "interrupted", 130
        logger.error("\n[EXIT] Motion Cluster arrete par utilisateur")
    except Exception as exc:
        status, summary, code = "failed", f"{type(exc).__name__}: {exc}", 1
        logger.error("\n[FATAL ERROR] %s", exc)
        logger.debug("traceback", exc_info=True)
    record(cfg, args.command, status, summary, metadata)
    return code


if __name__ == "__main__":
    sys.exit(main())
