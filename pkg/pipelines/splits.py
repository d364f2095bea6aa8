"""
Splits - Partition des sequences en jeux de donnees
====================================================

Les sequences entieres sont reparties (jamais les frames d'une meme
sequence dans deux jeux): train_pseudo, train_det, val_pseudo, val_det.

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
import math
from pathlib import Path
from typing import Dict, List, Mapping, Sequence as Seq, Union

import numpy as np

from core.config import SPLIT_NAMES
from core.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "splits"


def split_sizes(count: int, fractions: Mapping[str, float]) -> Dict[str, int]:
    """
    Taille de chaque jeu

    floor(f * N); si les fractions somment a 1, le reste va aux plus grandes
    parties fractionnaires (egalites: ordre des jeux). Chaque jeu non nul
    recoit au moins une sequence.
    """
    names = list(fractions)
    sizes = {name: int(math.floor(fractions[name] * count + 1e-9)) for name in names}
    if abs(sum(fractions.values()) - 1.0) <= 1e-9:
        remainder = count - sum(sizes.values())
        by_fraction = sorted(
            names, key=lambda n: (-(fractions[n] * count - sizes[n]), names.index(n))
        )
        for name in by_fraction[:max(remainder, 0)]:
            sizes[name] += 1
    for name in names:
        if fractions[name] > 0 and sizes[name] == 0:
            donor = max(names, key=lambda n: (sizes[n], -names.index(n)))
            if sizes[donor] <= 1:
                raise DataError(f"not enough sequences ({count}) for every nonzero split")
            sizes[donor] -= 1
            sizes[name] = 1
    return sizes


def split_dataset(sequences: Seq[str], fractions: Mapping[str, float], seed: int) -> Dict[str, List[str]]:
    """
    Repartit des sequences par melange seede

    Args:
        sequences: Noms de sequences
        fractions: {jeu: fraction}, somme <= 1
        seed: Graine du melange

    Returns:
        {jeu: noms de sequences}

    Raises:
        DataError: moins de sequences que de jeux non nuls
    """
    if any(f < 0 for f in fractions.values()) or sum(fractions.values()) > 1.0 + 1e-9:
        raise ConfigError("split fractions must be >= 0 and sum to <= 1")
    names = sorted(sequences)
    nonzero = sum(1 for f in fractions.values() if f > 0)
    if len(names) < nonzero:
        raise DataError(f"{len(names)} sequence(s) for {nonzero} nonzero splits")
    order = np.random.default_rng(seed).permutation(len(names))
    shuffled = [names[i] for i in order]
    sizes = split_sizes(len(names), fractions)
    out: Dict[str, List[str]] = {}
    start = 0
    for name in fractions:
        out[name] = sorted(shuffled[start:start + sizes[name]])
        start += sizes[name]
    logger.info("[Splits] %s", ", ".join(f"{k}={len(v)}" for k, v in out.items()))
    return out


def render_split_manifest(splits: Mapping[str, Seq[str]]) -> str:
    lines = []
    for split, names in splits.items():
        lines += [f"{name} {split}" for name in names]
    return "\n".join(lines) + "\n" if lines else ""


def write_split_manifest(splits: Mapping[str, Seq[str]], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_split_manifest(splits), encoding="utf-8")
    return path


def read_split_manifest(path: Union[str, Path]) -> Dict[str, List[str]]:
    """Relit un manifest `sequence split` (DataError si une sequence apparait deux fois)"""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"split manifest not found: {path} (run `split` first)")
    splits: Dict[str, List[str]] = {name: [] for name in SPLIT_NAMES}
    seen = set()
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2 or parts[1] not in splits:
            raise DataError(f"{path}: line {number}: expected '<sequence> <split>'")
        if parts[0] in seen:
            raise DataError(f"{path}: line {number}: sequence {parts[0]} listed twice")
        seen.add(parts[0])
        splits[parts[1]].append(parts[0])
    return splits
