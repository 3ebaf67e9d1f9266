"""Featured graphs and the standard matrices derived from them."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


@dataclass
class FeaturedGraph:
    """Undirected graph with a real feature vector attached to every node.

    Edges are stored as sorted (u, v) pairs with u < v, deduplicated.
    Features are an (num_nodes, d) float64 array.
    """

    num_nodes: int
    edges: list = field(default_factory=list)
    features: np.ndarray = None

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]


def build_graph(num_nodes, edges, features) -> FeaturedGraph:
    """Validate and canonicalize a graph: sorted endpoints, no dups, no loops."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("features must be a list of equal-length vectors")
    if features.shape[0] != num_nodes:
        raise ValueError(
            f"expected {num_nodes} feature vectors, got {features.shape[0]}"
        )
    if features.shape[1] < 1:
        raise ValueError("feature dimension must be >= 1")
    canon = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise ValueError(f"self-loop ({u},{v}) rejected")
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise ValueError(f"edge ({u},{v}) out of range for {num_nodes} nodes")
        canon.add((min(u, v), max(u, v)))
    return FeaturedGraph(num_nodes, sorted(canon), features)


def m_hop_neighborhood(g: FeaturedGraph, v: int, m: int) -> FeaturedGraph:
    """Induced subgraph on all nodes at BFS distance <= m from v.

    Node order in the result is ascending original index.
    """
    if not (0 <= v < g.num_nodes):
        raise ValueError(f"node {v} out of range")
    adj = [[] for _ in range(g.num_nodes)]
    for a, b in g.edges:
        adj[a].append(b)
        adj[b].append(a)
    dist = {v: 0}
    q = deque([v])
    while q:
        u = q.popleft()
        if dist[u] == m:
            continue
        for w in adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                q.append(w)
    keep = sorted(dist)
    index = {u: i for i, u in enumerate(keep)}
    sub_edges = [
        (index[a], index[b]) for a, b in g.edges if a in dist and b in dist
    ]
    return FeaturedGraph(len(keep), sorted(sub_edges), g.features[keep].copy())


def normalize_features(features) -> np.ndarray:
    """Mean-center, then divide by the maximum Euclidean norm.

    Identical inputs (max norm ~ 0) map to all-zero vectors instead of
    raising, so degenerate neighborhoods stay processable.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("features must be a nonempty 2-d array")
    centered = X - X.mean(axis=0)
    max_norm = np.linalg.norm(centered, axis=1).max()
    if max_norm < 1e-12:
        return np.zeros_like(centered)
    return centered / max_norm


def adjacency(g: FeaturedGraph) -> np.ndarray:
    A = np.zeros((g.num_nodes, g.num_nodes))
    for u, v in g.edges:
        A[u, v] = 1.0
        A[v, u] = 1.0
    return A


def degree(g: FeaturedGraph) -> np.ndarray:
    return np.diag(adjacency(g).sum(axis=1))


def _inv_sqrt_degrees(g: FeaturedGraph) -> np.ndarray:
    # pseudo-inverse convention: isolated nodes get 0
    deg = adjacency(g).sum(axis=1)
    out = np.zeros_like(deg)
    nz = deg > 0
    out[nz] = deg[nz] ** -0.5
    return out

def normalized_laplacian(g: FeaturedGraph) -> np.ndarray:
    """I - D^{-1/2} A D^{-1/2}, with zero rows/columns for isolated nodes."""
    A = adjacency(g)
    dis = _inv_sqrt_degrees(g)
    L = -dis[:, None] * A * dis[None, :]
    deg = A.sum(axis=1)
    L[np.arange(g.num_nodes), np.arange(g.num_nodes)] = (deg > 0).astype(float)
    return L


def random_walk_matrix(g: FeaturedGraph) -> np.ndarray:
    """A D^{-1}; columns out of an isolated node are all zero."""
    A = adjacency(g)
    deg = A.sum(axis=1)
    inv = np.zeros_like(deg)
    nz = deg > 0
    inv[nz] = 1.0 / deg[nz]
    return A * inv[None, :]
