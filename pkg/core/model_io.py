"""
Model IO - Sauvegarde et chargement des modeles
================================================

Format texte UTF-8: en-tete `key=value`, puis blocs
`TENSOR <name> <rows> <cols>` en decimal a 17 chiffres significatifs
(relecture exacte des float64).

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
from dataclasses import fields
from pathlib import Path
from typing import Dict, Union

import numpy as np

from core.errors import ConfigError, ModelFormatError
from core.mpn import MpnConfig, MpnModel, parameter_shapes

logger = logging.getLogger(__name__)

MAGIC = "MPN-MODEL 1"


def render_model(model: MpnModel) -> str:
    lines = [MAGIC, f"node_dim={model.node_dim}", f"edge_dim={model.edge_dim}"]
    for f in fields(model.cfg):
        lines.append(f"{f.name}={getattr(model.cfg, f.name)}")
    for key in sorted(model.metadata):
        lines.append(f"meta.{key}={model.metadata[key]}")
    lines.append("END")
    for name, value in model.params.items():
        rows, cols = value.shape
        lines.append(f"TENSOR {name} {rows} {cols}")
        for row in value:
            lines.append(" ".join(f"{v:.17g}" for v in row.tolist()))
    return "\n".join(lines) + "\n"


def save_model(model: MpnModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_model(model), encoding="utf-8")
    logger.info("[ModelIO] saved %d parameters to %s", model.num_parameters, path)
    return path


def _parse_header(lines, path) -> Dict[str, str]:
    if not lines or lines[0].strip() != MAGIC:
        raise ModelFormatError(f"{path}: not a model file (missing '{MAGIC}')")
    header: Dict[str, str] = {}
    for i, line in enumerate(lines[1:], start=2):
        if line.strip() == "END":
            header["__body__"] = str(i)
            return header
        key, sep, value = line.partition("=")
        if not sep:
            raise ModelFormatError(f"{path}: line {i}: expected key=value")
        header[key.strip()] = value.strip()
    raise ModelFormatError(f"{path}: truncated header (no END line)")


def _cfg_from_header(header: Dict[str, str], path) -> MpnConfig:
    kwargs = {}
    for f in fields(MpnConfig):
        if f.name not in header:
            raise ModelFormatError(f"{path}: missing hyperparameter {f.name}")
        raw = header[f.name]
        try:
            kwargs[f.name] = type(f.default)(raw)
        except ValueError as exc:
            raise ModelFormatError(f"{path}: bad value for {f.name}: {raw!r}") from exc
    try:
        return MpnConfig(**kwargs)
    except ConfigError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc


def load_model(path: Union[str, Path]) -> MpnModel:
    """
    Charge un modele sauvegarde par save_model

    Raises:
        ModelFormatError: fichier tronque, tenseur manquant ou forme incoherente
    """
    path = Path(path)
    if not path.is_file():
        raise ModelFormatError(f"model file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    header = _parse_header(lines, path)
    cfg = _cfg_from_header(header, path)
    try:
        node_dim, edge_dim = int(header["node_dim"]), int(header["edge_dim"])
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"{path}: missing or bad node_dim/edge_dim") from exc
    metadata = {k[len("meta."):]: v for k, v in header.items() if k.startswith("meta.")}
    model = MpnModel(node_dim, edge_dim, cfg, metadata)

    expected = parameter_shapes(node_dim, edge_dim, cfg)
    pos = int(header["__body__"])
    loaded = {}
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        parts = lines[pos].split()
        if len(parts) != 4 or parts[0] != "TENSOR":
            raise ModelFormatError(f"{path}: line {pos + 1}: expected TENSOR block")
        name = parts[1]
        try:
            rows, cols = int(parts[2]), int(parts[3])
        except ValueError as exc:
            raise ModelFormatError(f"{path}: line {pos + 1}: bad tensor shape") from exc
        if name not in expected:
            raise ModelFormatError(f"{path}: unknown tensor {name}")
        if (rows, cols) != expected[name]:
            raise ModelFormatError(f"{path}: tensor {name} has shape {(rows, cols)}, expected {expected[name]}")
        body = lines[pos + 1:pos + 1 + rows]
        if len(body) != rows:
            raise ModelFormatError(f"{path}: tensor {name} truncated")
        try:
            values = np.array([[float(v) for v in row.split()] for row in body], dtype=np.float64)
        except ValueError as exc:
            raise ModelFormatError(f"{path}: tensor {name}: bad number") from exc
        if values.shape != (rows, cols):
            raise ModelFormatError(f"{path}: tensor {name} truncated")
        loaded[name] = values
        pos += 1 + rows

    missing = sorted(set(expected) - set(loaded))
    if missing:
        raise ModelFormatError(f"{path}: truncated file, missing tensors {', '.join(missing)}")
    model.params = {name: loaded[name] for name in expected}
    return model
