"""Exact and sigmoid-smoothed Euler Characteristic Transforms of graphs.

A direction theta and a threshold t carve out the sublevel subgraph
{v : <theta, x(v)> <= t} plus the edges whose endpoint-max projection is
<= t; the transform records its Euler characteristic (vertices minus
edges) on a grid of directions and thresholds. The smoothed variant
replaces the step counts with sigmoids of sharpness lam so gradients can
flow to the directions and the features.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .graphs import FeaturedGraph, m_hop_neighborhood, normalize_features


class DirectionSet:
    """Unit vectors on the sphere, optionally trainable.

    The vectors live in a Parameter so a trainable set plugs straight into
    an optimizer; renormalize_directions() projects back onto the sphere
    after a step.
    """

    def __init__(self, vectors, trainable: bool = False, seed: int = 0):
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        self.param = ad.Parameter(vectors, trainable=trainable, name="directions")
        self.trainable = trainable
        self.seed = seed

    @property
    def vectors(self) -> np.ndarray:
        return self.param.data

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    def value(self) -> ad.Value:
        return self.param.value


def sample_directions(d: int, n: int, seed: int = 0, trainable: bool = False) -> DirectionSet:
    """n i.i.d. uniform unit vectors on S^{d-1} (normalized Gaussians)."""
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    rng = np.random.default_rng(seed)
    vecs = rng.standard_normal((n, d))
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    # a zero draw has probability 0; guard anyway
    bad = norms[:, 0] < 1e-12
    while bad.any():
        vecs[bad] = rng.standard_normal((bad.sum(), d))
        norms = np.linalg.norm(vecs, axis=1, keepdims=True)
        bad = norms[:, 0] < 1e-12
    return DirectionSet(vecs / norms, trainable=trainable, seed=seed)


def renormalize_directions(dirs: DirectionSet) -> None:
    """Rescale every direction to unit norm, in place.

    A direction that collapsed to (near) zero is replaced by a fresh
    seeded random unit vector.
    """
    vecs = dirs.param.data
    norms = np.linalg.norm(vecs, axis=1)
    rng = np.random.default_rng(dirs.seed + 1)
    for i in range(vecs.shape[0]):
        if norms[i] < 1e-12:
            v = rng.standard_normal(vecs.shape[1])
            vecs[i] = v / np.linalg.norm(v)
        else:
            vecs[i] = vecs[i] / norms[i]


@dataclass
class ThresholdGrid:
    """Strictly increasing threshold values."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("thresholds must be a 1-d nonempty array")
        if not np.all(np.diff(self.values) > 0):
            raise ValueError("thresholds must be strictly increasing")

    @property
    def count(self) -> int:
        return self.values.size

    @staticmethod
    def uniform(n: int = 16, lo: float = -1.1, hi: float = 1.1) -> "ThresholdGrid":
        # normalized features live in the unit ball, so projections span
        # [-1, 1]; default grid covers that with 10% margin
        return ThresholdGrid(np.linspace(lo, hi, n))


@dataclass
class EctMatrix:
    """|directions| x |thresholds| grid of Euler characteristic samples.

    entries is an integer ndarray in exact mode and an autodiff Value in
    smoothed mode.
    """

    entries: object
    provenance: str = "exact"
    sharpness: float = None

    @property
    def rows(self) -> int:
        return self._array().shape[0]

    @property
    def cols(self) -> int:
        return self._array().shape[1]

    def _array(self) -> np.ndarray:
        if isinstance(self.entries, ad.Value):
            return self.entries.data
        return self.entries

    def as_array(self) -> np.ndarray:
        return np.asarray(self._array(), dtype=np.float64)


def _projections(g: FeaturedGraph, dirs: DirectionSet) -> np.ndarray:
    if g.feature_dim != dirs.dim:
        raise ValueError(
            f"feature dim {g.feature_dim} != direction dim {dirs.dim}"
        )
    return dirs.vectors @ g.features.T  # (n_dirs, n_nodes)


def exact_ect(g: FeaturedGraph, dirs: DirectionSet, grid: ThresholdGrid) -> EctMatrix:
    """Integer ECT: vertex count minus edge count of each sublevel subgraph."""
    P = _projections(g, dirs)
    t = grid.values
    vcount = (P[:, None, :] <= t[None, :, None]).sum(axis=2)
    if g.edges:
        e = np.asarray(g.edges)
        Pe = np.maximum(P[:, e[:, 0]], P[:, e[:, 1]])
        ecount = (Pe[:, None, :] <= t[None, :, None]).sum(axis=2)
    else:
        ecount = np.zeros_like(vcount)
    return EctMatrix((vcount - ecount).astype(np.int64), "exact")


def smooth_ect(g: FeaturedGraph, dirs: DirectionSet, grid: ThresholdGrid,
               sharpness: float = 16.0, features_value: ad.Value = None) -> EctMatrix:
    """Differentiable ECT; entries form an autodiff Value matrix.

    Gradients flow to the direction parameters when the set is trainable,
    and to features_value when one is supplied (an (n, d) Value replacing
    g.features, e.g. learned embeddings). The edge projection is a hard
    endpoint max inside the sigmoid, with the first-operand subgradient at
    ties.
    """
    if sharpness <= 0:
        raise ValueError("sharpness must be > 0")
    if g.feature_dim != dirs.dim:
        raise ValueError(
            f"feature dim {g.feature_dim} != direction dim {dirs.dim}"
        )
    theta = dirs.value() if dirs.trainable else ad.Value(dirs.vectors)
    if features_value is None:
        X = ad.Value(g.features.T)  # (d, n)
    else:
        X = ad.transpose(features_value, (1, 0))
    P = ad.matmul(theta, X)  # (n_dirs, n)
    t = ad.Value(grid.values.reshape(1, grid.count, 1))
    n_dirs = dirs.count
    vterm = ad.vsum(
        ad.sigmoid((t - ad.reshape(P, (n_dirs, 1, g.num_nodes))) * sharpness),
        axis=2,
    )
    if g.edges:
        e = np.asarray(g.edges)
        Pe = ad.max2(ad.take(P, e[:, 0], axis=1), ad.take(P, e[:, 1], axis=1))
        eterm = ad.vsum(
            ad.sigmoid((t - ad.reshape(Pe, (n_dirs, 1, len(g.edges)))) * sharpness),
            axis=2,
        )
        entries = vterm - eterm
    else:
        entries = vterm
    return EctMatrix(entries, "smoothed", sharpness)


def local_ect(g: FeaturedGraph, v: int, m: int, dirs: DirectionSet,
              grid: ThresholdGrid, sharpness: float = 16.0,
              mode: str = "exact") -> EctMatrix:
    """ECT of the normalized m-hop neighborhood of node v (edges included)."""
    if m < 1:
        raise ValueError("hop count must be >= 1")
    sub = m_hop_neighborhood(g, v, m)
    sub = FeaturedGraph(sub.num_nodes, sub.edges, normalize_features(sub.features))
    if mode == "exact":
        return exact_ect(sub, dirs, grid)
    if mode == "smoothed":
        return smooth_ect(sub, dirs, grid, sharpness)
    raise ValueError(f"unknown mode {mode!r}")
