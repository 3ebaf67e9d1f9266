import itertools
import os

import numpy as np
import pytest

from leapgraph import build_graph

FIXTURES = os.path.join(os.path.dirname(__file__), "data")


def random_graph(rng, max_nodes=12, edge_prob=0.4, dim=2):
    """Erdos-Renyi graph with standard normal features."""
    n = int(rng.integers(1, max_nodes + 1))
    edges = [(u, v) for u, v in itertools.combinations(range(n), 2)
             if rng.uniform() < edge_prob]
    return build_graph(n, edges, rng.standard_normal((n, dim)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def permute_graph(g, perm):
    """Relabel nodes by perm: new index perm[i] holds old node i."""
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    edges = [(int(perm[u]), int(perm[v])) for u, v in g.edges]
    return build_graph(g.num_nodes, edges, g.features[inv])
