"""
Message Passing Network - Classification d'aretes
==================================================

Reseau a passage de messages en numpy: encodeurs lineaires, mise a jour
des aretes et des noeuds a poids partages sur L couches, agregation par
moyenne, classifieur unique applique aux aretes de chaque couche.

Features:
- Forward train (dropout seede, activations en cache) / eval (pur)
- Backward exact en mode inverse, cumule sur les couches partagees
- Garde NaN/Inf apres chaque couche
- Initialisation Kaiming uniforme seedee

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.special import expit

from core.errors import ConfigError, NumericalError, ShapeError

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "identity", "tanh")
LAYER_NORM_EPS = 1e-5
BLOCKS = ("edge_upd", "node_upd")


@dataclass(frozen=True)
class MpnConfig:
    """Hyperparametres du reseau"""

    hidden_node: int = 32
    hidden_edge: int = 64
    layers: int = 4
    dropout: float = 0.1
    activation: str = "relu"
    init_seed: int = 0
    inference_dtype: str = "float64"

    def __post_init__(self):
        if self.hidden_node < 1 or self.hidden_edge < 1:
            raise ConfigError("mpn.hidden_node and mpn.hidden_edge must be >= 1")
        if self.layers < 1:
            raise ConfigError("mpn.layers must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ConfigError("mpn.dropout must be in [0, 1)")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"mpn.activation must be one of {', '.join(ACTIVATIONS)}")
        if self.inference_dtype not in ("float64", "float32"):
            raise ConfigError("mpn.inference_dtype must be float64 or float32")


def parameter_shapes(node_dim: int, edge_dim: int, cfg: MpnConfig) -> Dict[str, Tuple[int, int]]:
    """Formes (lignes, colonnes) de chaque tenseur; les vecteurs sont des matrices 1 x n"""
    hn, he = cfg.hidden_node, cfg.hidden_edge
    joint = he + 2 * hn
    return {
        "node_enc.W": (node_dim, hn),
        "node_enc.b": (1, hn),
        "edge_enc.W": (edge_dim, he),
        "edge_enc.b": (1, he),
        "edge_upd.W": (joint, he),
        "edge_upd.b": (1, he),
        "edge_upd.gamma": (1, he),
        "edge_upd.beta": (1, he),
        "node_upd.W": (joint, hn),
        "node_upd.b": (1, hn),
        "node_upd.gamma": (1, hn),
        "node_upd.beta": (1, hn),
        "cls.W": (he, 1),
        "cls.b": (1, 1),
    }


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0).astype(z.dtype)
    if kind == "tanh":
        return 1.0 - a ** 2
    return np.ones_like(z)


def _block_forward(x, W, b, gamma, beta, kind, mask):
    """Lineaire -> activation -> LayerNorm -> dropout"""
    z = x @ W + b
    a = _activate(z, kind)
    mu = a.mean(axis=1, keepdims=True)
    var = ((a - mu) ** 2).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LAYER_NORM_EPS)
    xhat = (a - mu) * inv
    out = xhat * gamma + beta
    if mask is not None:
        out = out * mask
    return out, (x, z, a, xhat, inv, mask)


def _block_backward(dout, cache, W, gamma, kind):
    x, z, a, xhat, inv, mask = cache
    dn = dout * mask if mask is not None else dout
    dgamma = (dn * xhat).sum(axis=0, keepdims=True)
    dbeta = dn.sum(axis=0, keepdims=True)
    dxhat = dn * gamma
    width = a.shape[1]
    da = (inv / width) * (
        width * dxhat
        - dxhat.sum(axis=1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=1, keepdims=True)
    )
    dz = da * _activation_grad(z, a, kind)
    return dz @ W.T, x.T @ dz, dz.sum(axis=0, keepdims=True), dgamma, dbeta


@dataclass
class _LayerCache:
    edge_block: tuple
    edge_out: np.ndarray
    node_block: Optional[tuple] = None


@dataclass
class ForwardCache:
    """Activations gardees par un forward train pour le backward"""

    num_nodes: int
    edge_index: np.ndarray
    incidence_edge: np.ndarray
    incidence_other: np.ndarray
    incidence_target: np.ndarray
    has_edges: np.ndarray
    aggregate: sparse.csr_matrix
    enc_node: tuple
    enc_edge: tuple
    layers: List[_LayerCache] = field(default_factory=list)


@dataclass
class ForwardResult:
    """Logits et scores par couche (L listes de E valeurs)"""

    logits: List[np.ndarray]
    cache: Optional[ForwardCache] = None

    @property
    def scores(self) -> List[np.ndarray]:
        return [expit(z) for z in self.logits]

    @property
    def final_scores(self) -> np.ndarray:
        return expit(self.logits[-1])


class MpnModel:
    """
    Reseau de passage de messages pour la classification d'aretes

    Les blocs de mise a jour sont partages entre les couches: un seul jeu
    de parametres quel que soit le nombre de couches.
    """

    def __init__(self, node_dim: int, edge_dim: int, cfg: Optional[MpnConfig] = None,
                 metadata: Optional[Dict[str, str]] = None):
        """
        Args:
            node_dim: Dimension des attributs de noeuds
            edge_dim: Dimension des attributs d'aretes
            cfg: Hyperparametres
            metadata: Texte libre sauvegarde avec le modele (config des attributs)
        """
        if node_dim < 1 or edge_dim < 1:
            raise ConfigError("model feature dims must be >= 1")
        self.node_dim = int(node_dim)
        self.edge_dim = int(edge_dim)
        self.cfg = cfg or MpnConfig()
        self.metadata: Dict[str, str] = dict(metadata or {})
        self.params: Dict[str, np.ndarray] = self._init_params()

    def _init_params(self) -> Dict[str, np.ndarray]:
        rng = np.random.default_rng(self.cfg.init_seed)
        params = {}
        for name, shape in parameter_shapes(self.node_dim, self.edge_dim, self.cfg).items():
            if name.endswith(".W"):
                bound = math.sqrt(6.0 / shape[0])
                params[name] = rng.uniform(-bound, bound, size=shape)
            elif name.endswith(".gamma"):
                params[name] = np.ones(shape)
            else:
                params[name] = np.zeros(shape)
        return params

    @property
    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def zero_grads(self) -> Dict[str, np.ndarray]:
        return {name: np.zeros_like(p) for name, p in self.params.items()}

    def _check_inputs(self, node_feats, edge_index, edge_feats):
        node_feats = np.asarray(node_feats, dtype=np.float64)
        edge_feats = np.asarray(edge_feats, dtype=np.float64)
        edge_index = np.asarray(edge_index, dtype=np.int64).reshape(-1, 2)
        n = len(node_feats)
        node_feats = node_feats.reshape(n, -1) if n else np.zeros((0, self.node_dim))
        edge_feats = edge_feats.reshape(len(edge_feats), -1) if len(edge_feats) else np.zeros((0, self.edge_dim))
        if node_feats.shape[1] != self.node_dim:
            raise ShapeError(f"D_node mismatch: graph has {node_feats.shape[1]}, model expects {self.node_dim}")
        if edge_feats.shape[1] != self.edge_dim:
            raise ShapeError(f"D_edge mismatch: graph has {edge_feats.shape[1]}, model expects {self.edge_dim}")
        if len(edge_feats) != len(edge_index):
            raise ShapeError(f"E mismatch: {len(edge_index)} edges, {len(edge_feats)} edge feature rows")
        if len(edge_index) and (edge_index.min() < 0 or edge_index.max() >= n):
            raise ShapeError(f"edge index out of range for {n} nodes")
        return node_feats, edge_index, edge_feats

    def forward(self, node_feats, edge_index, edge_feats, train: bool = False,
                rng: Optional[np.random.Generator] = None) -> ForwardResult:
        """
        Passe avant

        Args:
            node_feats: (N, D_node)
            edge_index: (E, 2)
            edge_feats: (E, D_edge)
            train: Active le dropout et garde le cache pour le backward
            rng: Generateur des masques de dropout (requis si dropout > 0 en train)

        Returns:
            ForwardResult avec les logits des L couches
        """
        x_n, ei, x_e = self._check_inputs(node_feats, edge_index, edge_feats)
        n, e = len(x_n), len(ei)
        cfg = self.cfg
        act = cfg.activation
        dtype = np.float64 if train or cfg.inference_dtype == "float64" else np.float32
        p = {k: v.astype(dtype, copy=False) for k, v in self.params.items()}
        x_n, x_e = x_n.astype(dtype, copy=False), x_e.astype(dtype, copy=False)

        if e == 0:
            return ForwardResult(logits=[np.zeros(0, dtype=dtype) for _ in range(cfg.layers)])

        use_dropout = train and cfg.dropout > 0
        if use_dropout and rng is None:
            rng = np.random.default_rng(0)
        keep = 1.0 - cfg.dropout

        def drop_mask(shape):
            if not use_dropout:
                return None
            return (rng.random(shape) >= cfg.dropout).astype(dtype) / keep

        src, dst = ei[:, 0], ei[:, 1]
        inc_target = np.concatenate([src, dst])
        inc_other = np.concatenate([dst, src])
        inc_edge = np.concatenate([np.arange(e), np.arange(e)])
        degree = np.bincount(inc_target, minlength=n)
        has = degree > 0
        aggregate = sparse.csr_matrix(
            (1.0 / degree[inc_target], (inc_target, np.arange(2 * e))), shape=(n, 2 * e), dtype=dtype
        )

        z_n = x_n @ p["node_enc.W"] + p["node_enc.b"]
        h_n = _activate(z_n, act)
        z_e = x_e @ p["edge_enc.W"] + p["edge_enc.b"]
        h_e = _activate(z_e, act)
        cache = ForwardCache(
            num_nodes=n, edge_index=ei, incidence_edge=inc_edge, incidence_other=inc_other,
            incidence_target=inc_target, has_edges=has, aggregate=aggregate,
            enc_node=(x_n, z_n, h_n), enc_edge=(x_e, z_e, h_e),
        )

        logits = []
        for layer in range(1, cfg.layers + 1):
            x_upd = np.concatenate([h_e, h_n[src], h_n[dst]], axis=1)
            h_e_new, edge_block = _block_forward(
                x_upd, p["edge_upd.W"], p["edge_upd.b"], p["edge_upd.gamma"], p["edge_upd.beta"],
                act, drop_mask(h_e.shape),
            )
            logits.append((h_e_new @ p["cls.W"] + p["cls.b"]).ravel())
            layer_cache = _LayerCache(edge_block=edge_block, edge_out=h_e_new)

            if layer < cfg.layers:
                x_msg = np.concatenate([h_e_new[inc_edge], h_n[inc_other], h_n[inc_target]], axis=1)
                messages, node_block = _block_forward(
                    x_msg, p["node_upd.W"], p["node_upd.b"], p["node_upd.gamma"], p["node_upd.beta"],
                    act, drop_mask((2 * e, cfg.hidden_node)),
                )
                h_n = np.where(has[:, None], aggregate @ messages, h_n)
                layer_cache.node_block = node_block

            h_e = h_e_new
            if not (np.all(np.isfinite(h_e)) and np.all(np.isfinite(h_n)) and np.all(np.isfinite(logits[-1]))):
                raise NumericalError(f"non-finite activation in layer {layer}")
            if train:
                cache.layers.append(layer_cache)

        return ForwardResult(logits=logits, cache=cache if train else None)

    def predict(self, graph) -> np.ndarray:
        """Scores finaux (E,) d'un MotionGraph en mode eval"""
        return self.forward(graph.node_feats, graph.edge_index, graph.edge_feats).final_scores

    def backward(self, cache: Optional[ForwardCache], dlogits: List[np.ndarray]) -> Dict[str, np.ndarray]:
        """
        Gradients de tous les parametres

        Args:
            cache: Cache d'un forward train (None pour un graphe sans arete)
            dlogits: L tableaux (E,) de dPerte/dLogit

        Returns:
            Dictionnaire nom -> gradient (memes formes que params)
        """
        grads = self.zero_grads()
        cfg = self.cfg
        if len(dlogits) != cfg.layers:
            raise ShapeError(f"expected {cfg.layers} upstream gradients, got {len(dlogits)}")
        if cache is None:
            return grads
        p = self.params
        act = cfg.activation
        e = len(cache.edge_index)
        src, dst = cache.edge_index[:, 0], cache.edge_index[:, 1]
        hn, he = cfg.hidden_node, cfg.hidden_edge
        if len(cache.layers) != cfg.layers:
            raise ShapeError("forward cache does not cover every layer")

        dh_e = np.zeros((e, he))
        dh_n = np.zeros((cache.num_nodes, hn))
        for layer in range(cfg.layers, 0, -1):
            lc = cache.layers[layer - 1]
            d = np.asarray(dlogits[layer - 1], dtype=np.float64).reshape(-1, 1)
            if len(d) != e:
                raise ShapeError(f"layer {layer}: {len(d)} logit gradients for {e} edges")
            grads["cls.W"] += lc.edge_out.T @ d
            grads["cls.b"] += d.sum(axis=0, keepdims=True)
            dh_e = dh_e + d @ p["cls.W"].T

            dprev_n = np.zeros_like(dh_n)
            if lc.node_block is not None:
                has = cache.has_edges
                dprev_n[~has] += dh_n[~has]
                dmsg = cache.aggregate.T @ (dh_n * has[:, None])
                dx, dW, db, dg, dbeta = _block_backward(dmsg, lc.node_block, p["node_upd.W"], p["node_upd.gamma"], act)
                grads["node_upd.W"] += dW
                grads["node_upd.b"] += db
                grads["node_upd.gamma"] += dg
                grads["node_upd.beta"] += dbeta
                np.add.at(dh_e, cache.incidence_edge, dx[:, :he])
                np.add.at(dprev_n, cache.incidence_other, dx[:, he:he + hn])
                np.add.at(dprev_n, cache.incidence_target, dx[:, he + hn:])

            dx, dW, db, dg, dbeta = _block_backward(dh_e, lc.edge_block, p["edge_upd.W"], p["edge_upd.gamma"], act)
            grads["edge_upd.W"] += dW
            grads["edge_upd.b"] += db
            grads["edge_upd.gamma"] += dg
            grads["edge_upd.beta"] += dbeta
            np.add.at(dprev_n, src, dx[:, he:he + hn])
            np.add.at(dprev_n, dst, dx[:, he + hn:])
            dh_e, dh_n = dx[:, :he], dprev_n

        for prefix, (x, z, a), upstream in (("node_enc", cache.enc_node, dh_n), ("edge_enc", cache.enc_edge, dh_e)):
            dz = upstream * _activation_grad(z, a, act)
            grads[f"{prefix}.W"] += x.T @ dz
            grads[f"{prefix}.b"] += dz.sum(axis=0, keepdims=True)
        return grads

    def copy(self) -> "MpnModel":
        clone = MpnModel(self.node_dim, self.edge_dim, self.cfg, self.metadata)
        clone.params = {k: v.copy() for k, v in self.params.items()}
        return clone
