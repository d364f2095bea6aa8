"""
Experiment Router - Point d'entree des tableaux d'experience
=============================================================

Router central pour lancer les tableaux (t1, t2, t3, t8) sur un dossier de
sequences. Gere le chargement paresseux des donnees, le cache par
configuration et l'historique des runs.

Usage:
    router = ExperimentRouter.get_instance()
    result, paths = router.run("t3", "data/sequences", "reports", cfg)
    runs = router.get_history(cfg, days=7)

Author: Motion Cluster System
Date: 2025-11-24
"""

import asyncio
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from core.config import RunConfig, config_digest
from core.resource_profile import ResourceProfile
from core.run_ledger import RunLedger
from pipelines.experiments import TABLES, ExperimentContext, ExperimentResult, resolve_table, write_experiment
from pipelines.frame_executor import FrameExecutor

logger = logging.getLogger(__name__)


class ExperimentRouter:
    """
    Router central des experiences

    Features:
    - Lazy loading (donnees et splits charges a la premiere demande)
    - Contextes (frames filtrees) reutilises entre tableaux d'une meme config
    - Historique et statistiques via le journal des runs
    """

    _instance = None  # Singleton

    def __init__(self):
        self.contexts: Dict[Tuple[str, str], ExperimentContext] = {}
        self.resources: Optional[ResourceProfile] = None
        self.ledger: Optional[RunLedger] = None
        self.ledger_path: Optional[str] = None
        logger.debug("[ExperimentRouter] Router created (data not loaded yet)")

    def _ensure_initialized(self, cfg: RunConfig):
        """Profil de ressources et journal (lazy init)"""
        if self.resources is None:
            self.resources = ResourceProfile()
        if (cfg.run.ledger or None) != self.ledger_path:
            if self.ledger is not None:
                self.ledger.close()
            self.ledger = RunLedger(cfg.run.ledger) if cfg.run.ledger else None
            self.ledger_path = cfg.run.ledger or None

    def _load_context(self, cfg: RunConfig, data_root: Path) -> ExperimentContext:
        key = (config_digest(cfg), str(data_root.resolve()))
        if key in self.contexts:
            return self.contexts[key]
        self._ensure_initialized(cfg)
        jobs = self.resources.resolve_jobs(cfg.run.jobs)
        logger.info("[ExperimentRouter] Loading %s (jobs=%d)...", data_root, jobs)
        context = ExperimentContext.open(cfg, data_root, FrameExecutor(jobs, "Experiment"))
        self.contexts[key] = context
        return context

    async def run_async(self, table: str, data_root, out_dir, cfg: RunConfig,
                        gnuplot: bool = False) -> Tuple[ExperimentResult, List[Path]]:
        """
        Lance un tableau et ecrit ses rapports

        Args:
            table: t1_graph_ablation, t2_inflation, t3_pseudo_quality, t8_oracle (ou t1, t2, t3, t8)
            data_root: Dossier des sequences (et du manifest de splits)
            out_dir: Dossier des rapports
            cfg: Configuration du run
            gnuplot: Ecrire aussi le script .gp

        Returns:
            (lignes du tableau, fichiers ecrits)
        """
        name = resolve_table(table)
        context = self._load_context(cfg, Path(data_root))
        logger.info("[ExperimentRouter] Running %s...", name)
        result = await asyncio.to_thread(TABLES[name], context)
        paths = write_experiment(result, out_dir, gnuplot)
        logger.info("[ExperimentRouter] %s written to %s", name, Path(out_dir))
        return result, paths

    def run(self, table: str, data_root, out_dir, cfg: RunConfig,
            gnuplot: bool = False) -> Tuple[ExperimentResult, List[Path]]:
        """Version synchrone de run_async"""
        return asyncio.run(self.run_async(table, data_root, out_dir, cfg, gnuplot))

    def get_history(self, cfg: RunConfig, days: int = 7, command: Optional[str] = "experiment",
                    limit: int = 20) -> list:
        """Runs recents du journal (vide si le journal est desactive); command=None pour tous"""
        self._ensure_initialized(cfg)
        if self.ledger is None:
            return []
        return self.ledger.recall_runs(command=command, days=days, limit=limit)

    def get_stats(self, cfg: RunConfig) -> dict:
        self._ensure_initialized(cfg)
        if self.ledger is None:
            return {"runs_count": 0, "failed_count": 0, "commands": [], "last_activity": None}
        return self.ledger.get_stats()

    def close(self):
        if self.ledger is not None:
            self.ledger.close()
            self.ledger = None
            self.ledger_path = None
        self.contexts.clear()

    @classmethod
    def get_instance(cls) -> "ExperimentRouter":
        if cls._instance is None:
            cls._instance = ExperimentRouter()
        return cls._instance

