"""Graph-level prediction backbones: GCN, GAT, and a set-only model.

Every forward pass runs on an autodiff tape; a "graph" may also be the
disjoint union of a batch of graphs, in which case the pooling matrix
carries one row per member graph and attention masks keep tokens from
crossing graph boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graphs import FeaturedGraph, adjacency

_NOMP_LATENT = 16
_NOMP_HEAD_HIDDEN = 128
_MASK = -1e30


@dataclass
class ModelConfig:
    backbone: str = "gcn"
    layers: int = 5
    hidden: int = 32
    in_dim: int = 2
    out_dim: int = 2
    task: str = "classification"

    def __post_init__(self):
        if self.backbone not in ("gcn", "gat", "nomp"):
            raise ValueError(f"unknown backbone {self.backbone!r}")
        if self.layers < 1 or self.hidden < 1 or self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("dims and layer count must be positive")
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")


def alchemy_scale(cfg: ModelConfig) -> ModelConfig:
    """Preset with 10 layers and 64-dim hidden states for large regressions."""
    return ModelConfig(cfg.backbone, 10, 64, cfg.in_dim, cfg.out_dim, cfg.task)


def _glorot(rng, fi, fo):
    limit = math.sqrt(6.0 / (fi + fo))
    return rng.uniform(-limit, limit, (fi, fo))


def init_model_params(cfg: ModelConfig, rng) -> dict:
    p = {}
    if cfg.backbone in ("gcn", "gat"):
        dims = [cfg.in_dim] + [cfg.hidden] * (cfg.layers - 1) + [cfg.out_dim]
        for i in range(cfg.layers):
            p[f"W{i}"] = ad.Parameter(_glorot(rng, dims[i], dims[i + 1]),
                                      name=f"W{i}")
            if cfg.backbone == "gat":
                p[f"a_src{i}"] = ad.Parameter(
                    _glorot(rng, dims[i + 1], 1), name=f"a_src{i}")
                p[f"a_dst{i}"] = ad.Parameter(
                    _glorot(rng, dims[i + 1], 1), name=f"a_dst{i}")
    else:
        dm = _NOMP_LATENT
        p["Wp"] = ad.Parameter(_glorot(rng, cfg.in_dim, dm), name="Wp")
        p["bp"] = ad.Parameter(np.zeros(dm), name="bp")
        for name in ("Wq", "Wk", "Wv"):
            p[name] = ad.Parameter(_glorot(rng, dm, dm), name=name)
        hh = _NOMP_HEAD_HIDDEN
        p["Wh1"] = ad.Parameter(_glorot(rng, dm, hh), name="Wh1")
        p["bh1"] = ad.Parameter(np.zeros(hh), name="bh1")
        p["Wh2"] = ad.Parameter(_glorot(rng, hh, cfg.out_dim), name="Wh2")
        p["bh2"] = ad.Parameter(np.zeros(cfg.out_dim), name="bh2")
    return p


def count_model_params(params: dict) -> int:
    return sum(p.size for p in params.values())


# -- structural constants --------------------------------------------------

def gcn_propagation(A: np.ndarray) -> np.ndarray:
    """Symmetrically normalized adjacency with self-loops."""
    A = A + np.eye(A.shape[0])
    dis = A.sum(axis=1) ** -0.5
    return dis[:, None] * A * dis[None, :]


def attention_mask(A: np.ndarray, include_self: bool = True) -> np.ndarray:
    """Additive mask: 0 on allowed pairs, a large negative value elsewhere."""
    allowed = A > 0
    if include_self:
        allowed = allowed | np.eye(A.shape[0], dtype=bool)
    return np.where(allowed, 0.0, _MASK)


def block_diag(mats) -> np.ndarray:
    n = sum(m.shape[0] for m in mats)
    out = np.zeros((n, n))
    o = 0
    for m in mats:
        out[o:o + m.shape[0], o:o + m.shape[0]] = m
        o += m.shape[0]
    return out


def pooling_matrix(sizes) -> np.ndarray:
    """(num_graphs, num_nodes) mean-readout matrix for a disjoint union."""
    out = np.zeros((len(sizes), sum(sizes)))
    o = 0
    for i, n in enumerate(sizes):
        out[i, o:o + n] = 1.0 / n
        o += n
    return out


def block_mask(sizes) -> np.ndarray:
    """Additive attention mask restricting tokens to their own graph."""
    n = sum(sizes)
    out = np.full((n, n), _MASK)
    o = 0
    for s in sizes:
        out[o:o + s, o:o + s] = 0.0
        o += s
    return out


# -- forward passes --------------------------------------------------------

def _gcn_layers(prop: np.ndarray, x: ad.Value, params: dict, layers: int) -> ad.Value:
    P = ad.Value(prop)
    h = x
    for i in range(layers):
        h = ad.matmul(P, ad.matmul(h, params[f"W{i}"].value))
        if i < layers - 1:
            h = ad.relu(h)
    return h


def gcn_forward(g: FeaturedGraph, x: ad.Value, params: dict,
                layers: int = None) -> ad.Value:
    """Node states after the stacked graph-convolution layers."""
    layers = layers if layers is not None else _count_layers(params)
    return _gcn_layers(gcn_propagation(adjacency(g)), x, params, layers)


def _count_layers(params: dict) -> int:
    return sum(1 for k in params if k.startswith("W") and k[1:].isdigit())


def _gat_layers(mask: np.ndarray, x: ad.Value, params: dict, layers: int) -> ad.Value:
    M = ad.Value(mask)
    h = x
    for i in range(layers):
        hw = ad.matmul(h, params[f"W{i}"].value)
        s_src = ad.matmul(hw, params[f"a_src{i}"].value)  # (n, 1)
        s_dst = ad.matmul(hw, params[f"a_dst{i}"].value)
        scores = ad.leaky_relu(s_src + ad.transpose(s_dst, (1, 0)), 0.2)
        alpha = ad.softmax(scores + M, axis=1)
        h = ad.matmul(alpha, hw)
        if i < layers - 1:
            h = ad.relu(h)
    return h


def gat_forward(g: FeaturedGraph, x: ad.Value, params: dict,
                layers: int = None) -> ad.Value:
    """Node states from single-head attention over neighbors plus self."""
    layers = layers if layers is not None else _count_layers(params)
    return _gat_layers(attention_mask(adjacency(g)), x, params, layers)


def _nomp_graph_outputs(mask: np.ndarray, pool: np.ndarray, x: ad.Value,
                        params: dict) -> ad.Value:
    h = ad.matmul(x, params["Wp"].value) + params["bp"].value
    q = ad.matmul(h, params["Wq"].value)
    k = ad.matmul(h, params["Wk"].value)
    v = ad.matmul(h, params["Wv"].value)
    att = ad.softmax(ad.matmul(q, ad.transpose(k, (1, 0))) *
                     (1.0 / math.sqrt(_NOMP_LATENT)) + ad.Value(mask), axis=1)
    states = ad.matmul(att, v)
    pooled = ad.matmul(ad.Value(pool), states)
    hid = ad.relu(ad.matmul(pooled, params["Wh1"].value) + params["bh1"].value)
    return ad.matmul(hid, params["Wh2"].value) + params["bh2"].value


def nomp_forward(g: FeaturedGraph, x: ad.Value, params: dict) -> ad.Value:
    """Graph output from the set-only model: linear projection, one
    self-attention layer, mean pooling, feedforward head. Edges are
    ignored entirely."""
    pool = pooling_matrix([g.num_nodes])
    mask = np.zeros((g.num_nodes, g.num_nodes))
    return _nomp_graph_outputs(mask, pool, x, params)


def readout_mean(node_states: ad.Value) -> ad.Value:
    """Componentwise mean over nodes."""
    if node_states.shape[0] == 0:
        raise ValueError("cannot read out an empty graph")
    return ad.vmean(node_states, axis=0)


def embed_categorical(codes, table: ad.Parameter) -> ad.Value:
    """Row lookup of integer codes in a trainable embedding table."""
    codes = np.asarray(codes, dtype=np.intp)
    if codes.size and (codes.min() < 0 or codes.max() >= table.shape[0]):
        raise ValueError("code outside embedding table")
    return ad.take(table.value, codes, axis=0)


def model_forward(cfg: ModelConfig, params: dict, x: ad.Value,
                  prop_or_mask: np.ndarray, pool: np.ndarray) -> ad.Value:
    """Graph-level outputs for a (possibly batched) disjoint-union graph."""
    if cfg.backbone == "gcn":
        nodes = _gcn_layers(prop_or_mask, x, params, cfg.layers)
        return ad.matmul(ad.Value(pool), nodes)
    if cfg.backbone == "gat":
        nodes = _gat_layers(prop_or_mask, x, params, cfg.layers)
        return ad.matmul(ad.Value(pool), nodes)
    return _nomp_graph_outputs(prop_or_mask, pool, x, params)
