"""
Run Config - Configuration en couches
======================================

Compose les configs de chaque module en une RunConfig, par couches:
defauts -> fichier `section.key = value` -> environnement MC_<SECTION>_<KEY>
-> options CLI --set section.key=value.

Features:
- Validation par les dataclasses de chaque module (ConfigError nommant la cle)
- dump-config relisible (meme run a l'identique)
- Empreinte SHA-256 stable pour le journal des runs

Author: Motion Cluster System
Date: 2025-11-24
"""

import hashlib
import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

from core.baselines import DbscanConfig
from core.boxes import BoxConfig
from core.cluster import ClusterConfig
from core.errors import ConfigError
from core.evaluation import EvalConfig
from core.graphbuild import FeatureConfig
from core.mpn import MpnConfig
from core.preprocess import FilterConfig
from core.run_ledger import DEFAULT_LEDGER
from core.scene import SceneConfig
from core.training import TrainConfig

logger = logging.getLogger(__name__)

ENV_PREFIX = "MC_"
SPLIT_NAMES = ("train_pseudo", "train_det", "val_pseudo", "val_det")


@dataclass(frozen=True)
class RunSettings:
    """Section run: graine globale, parallelisme, journal, fractions de split"""

    seed: int = 0
    jobs: int = 0
    ledger: str = DEFAULT_LEDGER
    train_pseudo: float = 0.5
    train_det: float = 0.1
    val_pseudo: float = 0.3
    val_det: float = 0.1

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigError("run.seed must be >= 0")
        if self.jobs < 0:
            raise ConfigError("run.jobs must be >= 0 (0 = auto)")
        fractions = self.fractions()
        if any(f < 0 for f in fractions.values()):
            raise ConfigError("run split fractions must be >= 0")
        if sum(fractions.values()) > 1.0 + 1e-9:
            raise ConfigError("run split fractions must sum to <= 1")

    def fractions(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in SPLIT_NAMES}


SECTIONS = {
    "scene": SceneConfig,
    "filter": FilterConfig,
    "graph": FeatureConfig,
    "mpn": MpnConfig,
    "train": TrainConfig,
    "cluster": ClusterConfig,
    "boxes": BoxConfig,
    "baseline": DbscanConfig,
    "eval": EvalConfig,
    "run": RunSettings,
}


@dataclass(frozen=True)
class RunConfig:
    """Configuration complete d'une execution"""

    scene: SceneConfig = field(default_factory=SceneConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    graph: FeatureConfig = field(default_factory=FeatureConfig)
    mpn: MpnConfig = field(default_factory=MpnConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    boxes: BoxConfig = field(default_factory=BoxConfig)
    baseline: DbscanConfig = field(default_factory=DbscanConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    run: RunSettings = field(default_factory=RunSettings)

    def with_section(self, name: str, **changes) -> "RunConfig":
        """Copie avec une section modifiee (revalidee)"""
        return replace(self, **{name: replace(getattr(self, name), **changes)})


def _parse_scalar(raw: str, kind: type, key: str):
    text = raw.strip()
    if kind is bool:
        lowered = text.lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if kind is int:
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from exc
    if kind is float:
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from exc
    return text


def parse_value(raw: str, default, key: str):
    """Convertit un texte selon le type de la valeur par defaut"""
    if isinstance(default, tuple):
        kind = type(default[0]) if default else float
        parts = [p for p in raw.replace("(", "").replace(")", "").split(",") if p.strip()]
        return tuple(_parse_scalar(p, kind, key) for p in parts)
    return _parse_scalar(raw, type(default), key)


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _split_key(key: str) -> Tuple[str, str]:
    section, sep, name = key.strip().partition(".")
    if not sep or section not in SECTIONS:
        raise ConfigError(f"unknown config key {key!r} (expected section.key, sections: {', '.join(SECTIONS)})")
    names = {f.name for f in fields(SECTIONS[section])}
    if name not in names:
        raise ConfigError(f"unknown config key {section}.{name}")
    return section, name


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """Lignes `section.key = value` (commentaires #) -> {cle: texte}"""
    values: Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"{source}: line {number}: expected 'section.key = value'")
        section, name = _split_key(key)
        values[f"{section}.{name}"] = value.strip()
    return values


def env_overrides(env: Mapping[str, str]) -> Dict[str, str]:
    """Variables MC_<SECTION>_<KEY> -> {section.key: texte}"""
    values: Dict[str, str] = {}
    for var in sorted(env):
        if not var.startswith(ENV_PREFIX):
            continue
        rest = var[len(ENV_PREFIX):].lower()
        section, sep, name = rest.partition("_")
        if not sep or section not in SECTIONS:
            # MC_ est aussi utilise par d'autres outils (Midnight Commander)
            logger.debug("[Config] ignoring environment variable %s", var)
            continue
        section, name = _split_key(f"{section}.{name}")
        values[f"{section}.{name}"] = env[var]
    return values


def flag_overrides(flags: Iterable[str]) -> Dict[str, str]:
    """Options --set section.key=value"""
    values: Dict[str, str] = {}
    for flag in flags:
        key, sep, value = flag.partition("=")
        if not sep:
            raise ConfigError(f"--set {flag!r}: expected section.key=value")
        section, name = _split_key(key)
        values[f"{section}.{name}"] = value.strip()
    return values


def build_config(layers: Iterable[Dict[str, str]]) -> RunConfig:
    """Applique les couches (la derniere gagne) sur les defauts"""
    merged: Dict[str, str] = {}
    for layer in layers:
        merged.update(layer)
    sections = {}
    for section, cls in SECTIONS.items():
        kwargs = {}
        for f in fields(cls):
            key = f"{section}.{f.name}"
            if key in merged:
                kwargs[f.name] = parse_value(merged[key], f.default, key)
        try:
            sections[section] = cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"section {section}: {exc}") from exc
    return RunConfig(**sections)


def load_config(
    path: Optional[Union[str, Path]] = None,
    env: Optional[Mapping[str, str]] = None,
    overrides: Iterable[str] = (),
) -> RunConfig:
    """
    Charge la configuration en couches

    Args:
        path: Fichier de config (optionnel)
        env: Environnement (os.environ par defaut)
        overrides: Options --set section.key=value

    Returns:
        RunConfig validee
    """
    layers = []
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        layers.append(parse_config_text(path.read_text(encoding="utf-8"), str(path)))
    layers.append(env_overrides(os.environ if env is None else env))
    layers.append(flag_overrides(overrides))
    cfg = build_config(layers)
    logger.debug("[Config] digest %s", config_digest(cfg))
    return cfg


def dump_config(cfg: RunConfig) -> str:
    """Toutes les cles, par section puis ordre des champs"""
    lines = []
    for section in SECTIONS:
        values = getattr(cfg, section)
        for f in fields(values):
            lines.append(f"{section}.{f.name} = {format_value(getattr(values, f.name))}")
    return "\n".join(lines) + "\n"


def config_digest(cfg: RunConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode("utf-8")).hexdigest()
