"""
Trainer - Perte focale, Adam et boucle d'entrainement
======================================================

Supervision dense: la perte focale est appliquee aux aretes de chaque
couche (moyenne par arete, somme sur les couches). Lots = unions
disjointes de graphes, Adam avec correction de biais, pas de LR en escalier.

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence as Seq, Tuple

import numpy as np
from scipy.special import expit

from core.errors import ConfigError, NumericalError
from core.graphbuild import MotionGraph, merge_graphs
from core.mpn import MpnModel

logger = logging.getLogger(__name__)

PT_CLAMP = 1e-7


@dataclass(frozen=True)
class TrainConfig:
    """Recette d'entrainement"""

    epochs: int = 30
    batch_graphs: int = 4
    lr: float = 0.003
    step_size: int = 15
    gamma: float = 0.7
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    frame_stride: int = 2

    def __post_init__(self):
        for name in ("epochs", "batch_graphs", "step_size", "frame_stride"):
            if getattr(self, name) < 1:
                raise ConfigError(f"train.{name} must be >= 1")
        if not self.lr > 0 or not self.adam_eps > 0:
            raise ConfigError("train.lr and train.adam_eps must be > 0")
        if not 0 < self.gamma <= 1:
            raise ConfigError("train.gamma must be in (0, 1]")
        if not 0 < self.focal_alpha < 1 or self.focal_gamma < 0:
            raise ConfigError("train.focal_alpha must be in (0, 1) and train.focal_gamma >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("train.beta1 and train.beta2 must be in [0, 1)")


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """Taux d'apprentissage de l'epoque (1-indexee)"""
    return cfg.lr * cfg.gamma ** ((epoch - 1) // cfg.step_size)


def focal_loss(logits: np.ndarray, labels: np.ndarray, alpha: float = 0.25, gamma: float = 2.0) -> Tuple[float, np.ndarray]:
    """
    Perte focale binaire moyenne et son gradient par logit

    Args:
        logits: (E,) logits d'aretes
        labels: (E,) booleens
        alpha: Poids de la classe positive
        gamma: Exposant de focalisation

    Returns:
        (perte moyenne, dPerte/dLogit (E,))
    """
    z = np.asarray(logits, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=bool).ravel()
    if len(z) == 0:
        return 0.0, np.zeros(0)
    sign = np.where(y, 1.0, -1.0)
    pt = expit(sign * z)
    pt_c = np.clip(pt, PT_CLAMP, 1.0 - PT_CLAMP)
    alpha_t = np.where(y, alpha, 1.0 - alpha)
    one_minus = 1.0 - pt
    per_edge = -alpha_t * one_minus ** gamma * np.log(pt_c)
    unclamped = (pt >= PT_CLAMP) & (pt <= 1.0 - PT_CLAMP)
    grad = sign * alpha_t * (
        gamma * pt * one_minus ** gamma * np.log(pt_c) - one_minus ** (gamma + 1.0) * unclamped
    )
    return float(per_edge.mean()), grad / len(z)


def dense_loss(model: MpnModel, graph: MotionGraph, cfg: TrainConfig, train: bool = True,
               rng: Optional[np.random.Generator] = None):
    """Forward + perte sommee sur les couches; renvoie (perte, resultat, dlogits)"""
    result = model.forward(graph.node_feats, graph.edge_index, graph.edge_feats, train=train, rng=rng)
    total = 0.0
    dlogits = []
    for logits in result.logits:
        loss, grad = focal_loss(logits, graph.edge_labels, cfg.focal_alpha, cfg.focal_gamma)
        total += loss
        dlogits.append(grad)
    return total, result, dlogits


class Adam:
    """Adam avec correction de biais"""

    def __init__(self, params: Dict[str, np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        b1, b2 = self.cfg.beta1, self.cfg.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for name in sorted(params):
            g = grads[name]
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * g * g
            params[name] -= lr * (self.m[name] / c1) / (np.sqrt(self.v[name] / c2) + self.cfg.adam_eps)


@dataclass
class EpochLog:
    epoch: int
    lr: float
    loss: float
    accuracy: float
    val_loss: Optional[float] = None
    val_accuracy: Optional[float] = None

    def line(self) -> str:
        text = f"epoch {self.epoch} lr={self.lr:.6g} loss={self.loss:.4f} acc={self.accuracy:.4f}"
        if self.val_loss is not None:
            text += f" val_loss={self.val_loss:.4f} val_acc={self.val_accuracy:.4f}"
        return text


@dataclass
class TrainResult:
    model: MpnModel
    history: List[EpochLog] = field(default_factory=list)
    steps: int = 0


def evaluate_graphs(model: MpnModel, graphs: Seq[MotionGraph], cfg: TrainConfig) -> Tuple[float, float]:
    """
    Perte et precision d'aretes en mode eval

    Returns:
        (perte moyenne par graphe, precision finale sur toutes les aretes)
    """
    losses, correct, total = [], 0, 0
    for graph in graphs:
        loss, result, _ = dense_loss(model, graph, cfg, train=False)
        losses.append(loss)
        pred = result.final_scores >= 0.5
        correct += int(np.sum(pred == graph.edge_labels))
        total += graph.num_edges
    return (float(np.mean(losses)) if losses else 0.0), (correct / total if total else 0.0)


def train(model: MpnModel, dataset: Seq[MotionGraph], cfg: TrainConfig,
          val: Optional[Seq[MotionGraph]] = None) -> TrainResult:
    """
    Entraine le modele en place

    Args:
        model: Modele initialise
        dataset: Graphes etiquetes (non vide)
        cfg: Recette
        val: Graphes de validation (journalisation seulement)

    Returns:
        TrainResult avec l'historique par epoque
    """
    if not dataset:
        raise ConfigError("training dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(model.params, cfg)
    result = TrainResult(model=model)

    for epoch in range(1, cfg.epochs + 1):
        lr = lr_at_epoch(cfg, epoch)
        order = rng.permutation(len(dataset))
        epoch_loss, correct, total, batches = 0.0, 0, 0, 0
        for b, start in enumerate(range(0, len(order), cfg.batch_graphs)):
            batch = merge_graphs([dataset[i] for i in order[start:start + cfg.batch_graphs]])
            try:
                loss, fwd, dlogits = dense_loss(model, batch, cfg, train=True, rng=rng)
            except NumericalError as exc:
                raise NumericalError(f"epoch {epoch} batch {b}: {exc}") from exc
            if not np.isfinite(loss):
                raise NumericalError(f"epoch {epoch} batch {b}: loss is not finite")
            grads = model.backward(fwd.cache, dlogits)
            optimizer.step(model.params, grads, lr)
            result.steps += 1
            epoch_loss += loss
            batches += 1
            if batch.num_edges:
                correct += int(np.sum((fwd.final_scores >= 0.5) == batch.edge_labels))
                total += batch.num_edges

        log = EpochLog(epoch, lr, epoch_loss / batches, correct / total if total else 0.0)
        if val:
            log.val_loss, log.val_accuracy = evaluate_graphs(model, val, cfg)
        result.history.append(log)
        logger.info("[Trainer] %s", log.line())
    return result
