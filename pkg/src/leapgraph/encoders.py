"""Node positional encodings: the learnable local-ECT pipeline plus the
random-walk and Laplacian-eigenvector baselines.

The local-ECT encoding of a node is the smoothed ECT of its normalized
m-hop neighborhood pushed through a learnable projection. All projection
strategies operate on the set of Euler characteristic curves (one
|T|-vector per direction); DeepSets and the attention variants are
permutation invariant over that set, the linear and convolutional ones
are not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .ect import DirectionSet, EctMatrix, ThresholdGrid, sample_directions
from .graphs import (FeaturedGraph, m_hop_neighborhood, normalize_features,
                     normalized_laplacian, random_walk_matrix)

PROJECTION_KINDS = ("linear", "conv1d", "deepsets", "attention", "attention_pe")


@dataclass
class LeapConfig:
    hops: tuple = (1,)
    n_dirs: int = 16
    n_thresholds: int = 16
    sharpness: float = 16.0
    projection: str = "linear"
    out_dim: int = 10
    learn_directions: bool = False
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.hops, int):
            self.hops = (self.hops,)
        self.hops = tuple(int(m) for m in self.hops)
        if any(m < 1 for m in self.hops):
            raise ValueError("hop counts must be >= 1")
        if self.projection not in PROJECTION_KINDS:
            raise ValueError(f"unknown projection {self.projection!r}")
        if self.out_dim < 1:
            raise ValueError("out_dim must be >= 1")
        if self.out_dim % len(self.hops) != 0:
            raise ValueError(
                f"out_dim {self.out_dim} not divisible by {len(self.hops)} hop levels"
            )


# -- projection parameters -------------------------------------------------

_CONV_KERNEL_SIZES = (3, 5, 7)
_HIDDEN = 24
_ATTN_DIM = 16
_ATTN_FFN = 32


def _glorot(rng, fan_in, fan_out, shape=None):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (fan_in, fan_out) if shape is None else shape)


def init_projection_params(kind: str, n_dirs: int, n_thresholds: int,
                           out_dim: int, feature_dim: int, rng) -> dict:
    """Fresh learnable parameters for one projection strategy.

    Hidden widths are fixed so every strategy lands in a small (roughly
    1K-5K) parameter budget at the default 16x16 grid.
    """
    nt, k, h = n_thresholds, out_dim, _HIDDEN
    p = {}
    if kind == "linear":
        D = n_dirs * nt
        p["W"] = ad.Parameter(_glorot(rng, D, k).T, name="W")
    elif kind == "conv1d":
        for ks in _CONV_KERNEL_SIZES:
            if ks > nt:
                raise ValueError(f"kernel size {ks} wider than {nt} thresholds")
            p[f"kernel{ks}"] = ad.Parameter(
                rng.standard_normal(ks) / math.sqrt(ks), name=f"kernel{ks}")
        p["channel_bias"] = ad.Parameter(np.zeros((n_dirs, 1)), name="channel_bias")
        fin = nt * len(_CONV_KERNEL_SIZES)
        p["W1"] = ad.Parameter(_glorot(rng, fin, h), name="W1")
        p["b1"] = ad.Parameter(np.zeros(h), name="b1")
        p["W2"] = ad.Parameter(_glorot(rng, h, k), name="W2")
        p["b2"] = ad.Parameter(np.zeros(k), name="b2")
    elif kind == "deepsets":
        p["W1a"] = ad.Parameter(_glorot(rng, nt, h), name="W1a")
        p["b1a"] = ad.Parameter(np.zeros(h), name="b1a")
        p["W1b"] = ad.Parameter(_glorot(rng, h, h), name="W1b")
        p["b1b"] = ad.Parameter(np.zeros(h), name="b1b")
        p["W2a"] = ad.Parameter(_glorot(rng, h, h), name="W2a")
        p["b2a"] = ad.Parameter(np.zeros(h), name="b2a")
        p["W2b"] = ad.Parameter(_glorot(rng, h, k), name="W2b")
        p["b2b"] = ad.Parameter(np.zeros(k), name="b2b")
    elif kind in ("attention", "attention_pe"):
        din = nt + (feature_dim if kind == "attention_pe" else 0)
        dm = _ATTN_DIM
        for name in ("Wq", "Wk", "Wv"):
            p[name] = ad.Parameter(_glorot(rng, din, dm), name=name)
        p["Wf1"] = ad.Parameter(_glorot(rng, dm, _ATTN_FFN), name="Wf1")
        p["bf1"] = ad.Parameter(np.zeros(_ATTN_FFN), name="bf1")
        p["Wf2"] = ad.Parameter(_glorot(rng, _ATTN_FFN, dm), name="Wf2")
        p["bf2"] = ad.Parameter(np.zeros(dm), name="bf2")
        p["Wo1"] = ad.Parameter(_glorot(rng, dm, h), name="Wo1")
        p["bo1"] = ad.Parameter(np.zeros(h), name="bo1")
        p["Wo2"] = ad.Parameter(_glorot(rng, h, k), name="Wo2")
        p["bo2"] = ad.Parameter(np.zeros(k), name="bo2")
    else:
        raise ValueError(f"unknown projection {kind!r}")
    return p


def count_params(params: dict) -> int:
    return sum(p.size for p in params.values())


# -- projections over batches of ECT matrices ------------------------------
# tokens: Value of shape (batch, n_dirs, n_thresholds)

def _tokens_from_matrix(M) -> ad.Value:
    if isinstance(M, EctMatrix):
        entries = M.entries
        v = entries if isinstance(entries, ad.Value) else ad.Value(
            np.asarray(entries, dtype=np.float64))
    else:
        v = ad.as_value(M)
    if len(v.shape) == 2:
        v = ad.reshape(v, (1,) + tuple(v.shape))
    return v


def _project_linear(tokens: ad.Value, p: dict) -> ad.Value:
    b, nd, nt = tokens.shape
    flat = ad.reshape(tokens, (b, nd * nt))
    return ad.matmul(flat, ad.transpose(p["W"].value, (1, 0)))


def _project_conv1d(tokens: ad.Value, p: dict) -> ad.Value:
    b, nd, nt = tokens.shape
    outs = []
    for ks in _CONV_KERNEL_SIZES:
        pad = ks // 2
        w = p[f"kernel{ks}"].value
        acc = None
        for j in range(ks):
            # shift matrix: out[..., t] = sum_j w_j * M[..., t + j - pad]
            S = np.eye(nt, nt, k=-(j - pad))
            term = ad.matmul(tokens, ad.Value(S)) * ad.reshape(
                ad.take(w, [j], axis=0), (1, 1, 1))
            acc = term if acc is None else acc + term
        outs.append(acc)
    conv = ad.concat(outs, axis=-1) + ad.reshape(
        p["channel_bias"].value, (1, nd, 1))
    pooled = ad.vmean(conv, axis=1)  # average over direction channels
    hid = ad.relu(ad.matmul(pooled, p["W1"].value) + p["b1"].value)
    return ad.matmul(hid, p["W2"].value) + p["b2"].value


def _project_deepsets(tokens: ad.Value, p: dict) -> ad.Value:
    h = ad.relu(ad.matmul(tokens, p["W1a"].value) + p["b1a"].value)
    h = ad.matmul(h, p["W1b"].value) + p["b1b"].value
    pooled = ad.vsum(h, axis=1)
    h2 = ad.relu(ad.matmul(pooled, p["W2a"].value) + p["b2a"].value)
    return ad.matmul(h2, p["W2b"].value) + p["b2b"].value


def _project_attention(tokens: ad.Value, p: dict, dirs: DirectionSet = None,
                       with_direction_pe: bool = False) -> ad.Value:
    b, nd, _ = tokens.shape
    if with_direction_pe:
        if dirs is None:
            raise ValueError("attention_pe projection needs the direction set")
        theta = dirs.value() if dirs.trainable else ad.Value(dirs.vectors)
        tiled = ad.Value(np.ones((b, 1, 1))) * ad.reshape(
            theta, (1, nd, dirs.dim))
        tokens = ad.concat([tokens, tiled], axis=-1)
    q = ad.matmul(tokens, p["Wq"].value)
    k = ad.matmul(tokens, p["Wk"].value)
    v = ad.matmul(tokens, p["Wv"].value)
    att = ad.softmax(ad.matmul(q, ad.transpose(k, (0, 2, 1))) *
                     (1.0 / math.sqrt(_ATTN_DIM)), axis=-1)
    h = ad.matmul(att, v)
    ffn = ad.matmul(ad.relu(ad.matmul(h, p["Wf1"].value) + p["bf1"].value),
                    p["Wf2"].value) + p["bf2"].value
    h = h + ffn
    pooled = ad.vsum(h, axis=1)
    hid = ad.relu(ad.matmul(pooled, p["Wo1"].value) + p["bo1"].value)
    return ad.matmul(hid, p["Wo2"].value) + p["bo2"].value


def _project(tokens: ad.Value, kind: str, p: dict,
             dirs: DirectionSet = None) -> ad.Value:
    if kind == "linear":
        return _project_linear(tokens, p)
    if kind == "conv1d":
        return _project_conv1d(tokens, p)
    if kind == "deepsets":
        return _project_deepsets(tokens, p)
    if kind == "attention":
        return _project_attention(tokens, p)
    if kind == "attention_pe":
        return _project_attention(tokens, p, dirs, with_direction_pe=True)
    raise ValueError(f"unknown projection {kind!r}")


def project_linear(M, params) -> ad.Value:
    """Flatten the ECT matrix (direction-major) and apply a learnable map."""
    return ad.reshape(_project_linear(_tokens_from_matrix(M), params), (-1,))


def project_conv1d(M, params) -> ad.Value:
    """1-D convolutions over the threshold axis, channel average, then MLP."""
    return ad.reshape(_project_conv1d(_tokens_from_matrix(M), params), (-1,))


def project_deepsets(M, params) -> ad.Value:
    """MLP2(sum over directions of MLP1(ECC)); permutation invariant."""
    return ad.reshape(_project_deepsets(_tokens_from_matrix(M), params), (-1,))


def project_attention(M, params, with_direction_pe: bool = False,
                      dirs: DirectionSet = None) -> ad.Value:
    """Single-head attention over the set of ECCs, summed, then MLP."""
    return ad.reshape(
        _project_attention(_tokens_from_matrix(M), params, dirs,
                           with_direction_pe), (-1,))


# -- neighborhood batching -------------------------------------------------

@dataclass
class NeighborhoodBatch:
    """All m-hop neighborhoods of a graph stacked for one vectorized ECT.

    feats holds the normalized features of every (node, neighbor) pair;
    vert_ind / edge_ind scatter per-row sigmoid mass back to the owning
    node's ECT matrix.
    """

    feats: np.ndarray       # (M, d)
    vert_ind: np.ndarray    # (M, N)
    edge_u: np.ndarray      # (E,) row indices into feats
    edge_w: np.ndarray      # (E,)
    edge_ind: np.ndarray    # (E, N)
    num_nodes: int


def neighborhood_batch(g: FeaturedGraph, m: int) -> NeighborhoodBatch:
    feats, vown, eu, ew, eown = [], [], [], [], []
    offset = 0
    for v in range(g.num_nodes):
        sub = m_hop_neighborhood(g, v, m)
        nf = normalize_features(sub.features)
        feats.append(nf)
        vown.extend([v] * sub.num_nodes)
        for a, b in sub.edges:
            eu.append(offset + a)
            ew.append(offset + b)
            eown.append(v)
        offset += sub.num_nodes
    feats = np.concatenate(feats, axis=0)
    vert_ind = np.zeros((feats.shape[0], g.num_nodes))
    vert_ind[np.arange(feats.shape[0]), vown] = 1.0
    edge_ind = np.zeros((len(eu), g.num_nodes))
    if eu:
        edge_ind[np.arange(len(eu)), eown] = 1.0
    return NeighborhoodBatch(feats, vert_ind, np.asarray(eu, dtype=np.intp),
                             np.asarray(ew, dtype=np.intp), edge_ind,
                             g.num_nodes)


def merge_neighborhood_batches(batches) -> NeighborhoodBatch:
    """Disjoint union of per-graph batches (m-hop balls never cross graphs)."""
    feats = np.concatenate([b.feats for b in batches], axis=0)
    n_total = sum(b.num_nodes for b in batches)
    m_total = feats.shape[0]
    e_total = sum(len(b.edge_u) for b in batches)
    vert_ind = np.zeros((m_total, n_total))
    edge_ind = np.zeros((e_total, n_total))
    edge_u = np.zeros(e_total, dtype=np.intp)
    edge_w = np.zeros(e_total, dtype=np.intp)
    ro, co, eo = 0, 0, 0
    for b in batches:
        mr, nc, ne = b.feats.shape[0], b.num_nodes, len(b.edge_u)
        vert_ind[ro:ro + mr, co:co + nc] = b.vert_ind
        edge_ind[eo:eo + ne, co:co + nc] = b.edge_ind
        edge_u[eo:eo + ne] = b.edge_u + ro
        edge_w[eo:eo + ne] = b.edge_w + ro
        ro, co, eo = ro + mr, co + nc, eo + ne
    return NeighborhoodBatch(feats, vert_ind, edge_u, edge_w, edge_ind, n_total)


def ecc_tokens(nb: NeighborhoodBatch, dirs: DirectionSet, grid: ThresholdGrid,
               sharpness: float) -> ad.Value:
    """Smoothed per-node ECT matrices, shape (num_nodes, |dirs|, |grid|)."""
    theta = dirs.value() if dirs.trainable else ad.Value(dirs.vectors)
    P = ad.matmul(theta, ad.Value(nb.feats.T))  # (nd, M)
    nd, nt = dirs.count, grid.count
    t = ad.Value(grid.values.reshape(1, nt, 1))
    sig_v = ad.sigmoid((t - ad.reshape(P, (nd, 1, nb.feats.shape[0]))) * sharpness)
    acc = ad.matmul(sig_v, ad.Value(nb.vert_ind))  # (nd, nt, N)
    if len(nb.edge_u):
        Pe = ad.max2(ad.take(P, nb.edge_u, axis=1), ad.take(P, nb.edge_w, axis=1))
        sig_e = ad.sigmoid((t - ad.reshape(Pe, (nd, 1, len(nb.edge_u)))) * sharpness)
        acc = acc - ad.matmul(sig_e, ad.Value(nb.edge_ind))
    return ad.transpose(acc, (2, 0, 1))


# -- the full encoding -----------------------------------------------------

@dataclass
class LeapParams:
    """Learnable state of the encoding: directions, grid, per-hop projections."""

    cfg: LeapConfig
    directions: DirectionSet
    grid: ThresholdGrid
    proj: list  # one param dict per hop level

    def parameters(self):
        out = []
        if self.directions.trainable:
            out.append(self.directions.param)
        for p in self.proj:
            out.extend(p.values())
        return out


def init_leap_params(cfg: LeapConfig, feature_dim: int,
                     rng: np.random.Generator = None) -> LeapParams:
    """Fresh encoding parameters; pass an rng to draw an independent
    initialization (e.g. one per cross-validation fold) instead of the
    configuration-seeded one."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
        dir_seed = cfg.seed
    else:
        dir_seed = int(rng.integers(1 << 30))
    dirs = sample_directions(feature_dim, cfg.n_dirs, seed=dir_seed,
                             trainable=cfg.learn_directions)
    grid = ThresholdGrid.uniform(cfg.n_thresholds)
    k_sub = cfg.out_dim // len(cfg.hops)
    proj = [init_projection_params(cfg.projection, cfg.n_dirs,
                                   cfg.n_thresholds, k_sub, feature_dim, rng)
            for _ in cfg.hops]
    return LeapParams(cfg, dirs, grid, proj)


def leap_encode_value(nbs: list, params: LeapParams) -> ad.Value:
    """Per-node encodings as a tape Value, one NeighborhoodBatch per hop level."""
    cfg = params.cfg
    parts = []
    for nb, p in zip(nbs, params.proj):
        tokens = ecc_tokens(nb, params.directions, params.grid, cfg.sharpness)
        parts.append(_project(tokens, cfg.projection, p, params.directions))
    return parts[0] if len(parts) == 1 else ad.concat(parts, axis=-1)


def leap_encode(g: FeaturedGraph, cfg: LeapConfig,
                params: LeapParams = None) -> np.ndarray:
    """Per-node k-dimensional encodings of a single graph, as an array."""
    if g.feature_dim < 1:
        raise ValueError("graph has no features")
    if params is None:
        params = init_leap_params(cfg, g.feature_dim)
    nbs = [neighborhood_batch(g, m) for m in cfg.hops]
    return leap_encode_value(nbs, params).data.copy()


# -- baselines -------------------------------------------------------------

def rwpe(g: FeaturedGraph, k: int) -> np.ndarray:
    """Diagonals of the first k powers of the random walk matrix A D^{-1}."""
    if k < 1:
        raise ValueError("k must be >= 1")
    RW = random_walk_matrix(g)
    out = np.zeros((g.num_nodes, k))
    Pk = np.eye(g.num_nodes)
    for i in range(k):
        Pk = Pk @ RW
        out[:, i] = np.diag(Pk)
    return out


def symmetric_eigendecomposition(S: np.ndarray, tol: float = 1e-10,
                                 max_sweeps: int = 100):
    """Cyclic Jacobi rotations; returns ascending eigenvalues and the
    matrix whose columns are the corresponding orthonormal eigenvectors."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("matrix must be square")
    if np.abs(S - S.T).max() > 1e-10:
        raise ValueError("matrix is not symmetric")
    n = S.shape[0]
    A = S.copy()
    Q = np.eye(n)
    for _ in range(max_sweeps):
        off = np.abs(A - np.diag(np.diag(A))).max() if n > 1 else 0.0
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < tol * 1e-2:
                    continue
                diff = A[q, q] - A[p, p]
                if abs(apq) < 1e-36 * abs(diff):
                    t = apq / diff
                else:
                    phi = diff / (2.0 * apq)
                    t = 1.0 / (abs(phi) + math.sqrt(phi * phi + 1.0))
                    if phi < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
                Q = Q @ J
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], Q[:, order]


def lape(g: FeaturedGraph, k: int) -> np.ndarray:
    """Entries of the first k non-trivial Laplacian eigenvectors per node.

    Eigenvalues below 1e-8 count as trivial (one per connected component).
    Each eigenvector's sign is fixed so its largest-magnitude entry is
    positive (first index wins on ties); missing columns are zero-padded.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    L = normalized_laplacian(g)
    w, Q = symmetric_eigendecomposition(L)
    cols = [i for i in range(len(w)) if w[i] >= 1e-8][:k]
    out = np.zeros((g.num_nodes, k))
    for j, i in enumerate(cols):
        col = Q[:, i]
        if col[np.argmax(np.abs(col))] < 0:
            col = -col
        out[:, j] = col
    return out
