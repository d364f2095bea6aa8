"""
Resource Profile - Dimensionnement du parallelisme selon la machine
====================================================================

Inspecte la machine (coeurs physiques, memoire disponible, batterie) et
choisit un profil qui fixe le nombre de jobs par frame quand
run.jobs = 0 (auto).

Profils:
- PERFORMANCE: secteur, memoire confortable -> tous les coeurs physiques
- BALANCED: memoire moyenne ou batterie > 40% -> moitie des coeurs
- ECO: memoire faible ou batterie basse -> 1 job

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
from typing import Dict, Literal, Optional

import psutil

logger = logging.getLogger(__name__)

ProfileType = Literal["PERFORMANCE", "BALANCED", "ECO"]

# Memoire disponible (Mo) en dessous de laquelle on reduit le parallelisme
BALANCED_BELOW_MB = 4000
ECO_BELOW_MB = 1500


class ResourceProfile:
    """Profil de ressources et nombre de jobs par defaut"""

    def __init__(self):
        self.current_profile: ProfileType = self.get_performance_profile()

    def get_host_status(self) -> Dict:
        """Etat de la machine (coeurs, memoire, batterie)"""
        cores = psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
        memory = psutil.virtual_memory()
        try:
            battery = psutil.sensors_battery()
        except (AttributeError, NotImplementedError):
            battery = None
        return {
            "cores": int(cores),
            "available_mb": memory.available / 1024 / 1024,
            "battery_present": battery is not None,
            "battery_percent": battery.percent if battery is not None else 100,
            "plugged": battery.power_plugged if battery is not None else True,
        }

    def get_performance_profile(self, status: Optional[Dict] = None) -> ProfileType:
        status = status or self.get_host_status()
        available = status["available_mb"]
        if available < ECO_BELOW_MB:
            return "ECO"
        if not status["plugged"]:
            level = status["battery_percent"]
            if level <= 20:
                return "ECO"
            if level <= 80:
                return "BALANCED"
        if available < BALANCED_BELOW_MB:
            return "BALANCED"
        return "PERFORMANCE"

    def default_jobs(self, profile: Optional[ProfileType] = None, cores: Optional[int] = None) -> int:
        """
        Nombre de jobs pour le profil

        Args:
            profile: Profil (courant si None)
            cores: Coeurs physiques (detectes si None)
        """
        profile = profile or self.current_profile
        cores = cores or self.get_host_status()["cores"]
        if profile == "PERFORMANCE":
            return max(1, cores)
        if profile == "BALANCED":
            return max(1, cores // 2)
        return 1

    def resolve_jobs(self, requested: int) -> int:
        """run.jobs > 0 est respecte tel quel, 0 = choix du profil"""
        return requested if requested > 0 else self.default_jobs()

    def log_status(self, jobs: Optional[int] = None) -> None:
        """Bloc de statut en fin de commande longue"""
        status = self.get_host_status()
        ram_mb = psutil.Process().memory_info().rss / 1024 / 1024
        logger.info("[Resources] profile=%s cores=%d", self.current_profile, status["cores"])
        logger.info("[Resources] RAM used: %.0fMB, available: %.0fMB", ram_mb, status["available_mb"])
        if jobs is not None:
            logger.info("[Resources] jobs: %d", jobs)
