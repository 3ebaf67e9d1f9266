import numpy as np
import pytest

import leapgraph.autodiff as ad
from leapgraph import (DirectionSet, Parameter, ThresholdGrid, backward,
                       build_graph, exact_ect, finite_difference_check,
                       local_ect, m_hop_neighborhood, normalize_features,
                       renormalize_directions, sample_directions, smooth_ect)
from conftest import permute_graph, random_graph


def segment():
    return build_graph(2, [(0, 1)], [[0.0, 0.0], [1.0, 0.0]])


def triangle_unit():
    feats = [[1.0, 0.0], [-0.5, np.sqrt(3) / 2], [-0.5, -np.sqrt(3) / 2]]
    return build_graph(3, [(0, 1), (1, 2), (0, 2)], feats)


class TestDirections:
    def test_unit_norms(self):
        d = sample_directions(5, 40, seed=3)
        np.testing.assert_allclose(np.linalg.norm(d.vectors, axis=1), 1.0)
        assert d.count == 40 and d.dim == 5

    def test_one_dimensional_signs(self):
        d = sample_directions(1, 50, seed=0)
        assert set(np.unique(d.vectors)) <= {-1.0, 1.0}

    def test_approximately_uniform_mean(self):
        d = sample_directions(2, 20000, seed=1)
        assert np.abs(d.vectors.mean(axis=0)).max() < 0.02

    def test_deterministic(self):
        np.testing.assert_array_equal(sample_directions(3, 8, seed=9).vectors,
                                      sample_directions(3, 8, seed=9).vectors)

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            sample_directions(0, 4)
        with pytest.raises(ValueError):
            sample_directions(2, 0)

    def test_renormalize(self):
        d = DirectionSet([[3.0, 4.0], [0.0, 1.0]], trainable=True)
        renormalize_directions(d)
        np.testing.assert_allclose(d.vectors[0], [0.6, 0.8])
        np.testing.assert_allclose(d.vectors[1], [0.0, 1.0])

    def test_renormalize_replaces_collapsed(self):
        d = DirectionSet([[0.0, 0.0]], trainable=True, seed=5)
        renormalize_directions(d)
        assert np.linalg.norm(d.vectors[0]) == pytest.approx(1.0)
        again = DirectionSet([[0.0, 0.0]], trainable=True, seed=5)
        renormalize_directions(again)
        np.testing.assert_array_equal(d.vectors, again.vectors)


class TestThresholdGrid:
    def test_uniform_default_covers_margin(self):
        g = ThresholdGrid.uniform(16)
        assert g.count == 16
        assert g.values[0] == pytest.approx(-1.1)
        assert g.values[-1] == pytest.approx(1.1)

    def test_rejects_non_increasing(self):
        with pytest.raises(ValueError):
            ThresholdGrid([0.0, 0.0, 1.0])
        with pytest.raises(ValueError):
            ThresholdGrid([1.0, 0.0])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            ThresholdGrid([])


class TestExactEct:
    def test_segment_row(self):
        # direction (1,0), thresholds -0.5 / 0.5 / 1.5:
        # projections are 0 and 1; the edge activates at max = 1
        dirs = DirectionSet([[1.0, 0.0]])
        grid = ThresholdGrid([-0.5, 0.5, 1.5])
        M = exact_ect(segment(), dirs, grid)
        np.testing.assert_array_equal(M.entries, [[0, 1, 1]])
        assert M.provenance == "exact"

    def test_single_vertex(self):
        g = build_graph(1, [], [[0.0]])
        M = exact_ect(g, DirectionSet([[1.0]]), ThresholdGrid([1.0]))
        np.testing.assert_array_equal(M.entries, [[1]])

    def test_final_threshold_is_global_euler_characteristic(self, rng):
        grid = ThresholdGrid.uniform(8)
        for _ in range(200):
            g = random_graph(rng, max_nodes=12)
            g = build_graph(g.num_nodes, g.edges,
                            normalize_features(g.features))
            dirs = sample_directions(2, 6, seed=int(rng.integers(1 << 30)))
            M = exact_ect(g, dirs, grid)
            assert (M.entries[:, -1] == g.num_nodes - g.num_edges).all()

    def test_entries_are_integers(self):
        M = exact_ect(triangle_unit(), sample_directions(2, 4),
                      ThresholdGrid.uniform(8))
        assert M.entries.dtype == np.int64

    def test_node_permutation_invariance(self, rng):
        grid = ThresholdGrid.uniform(8)
        dirs = sample_directions(2, 6, seed=2)
        for _ in range(20):
            g = random_graph(rng, max_nodes=9)
            h = permute_graph(g, rng.permutation(g.num_nodes))
            np.testing.assert_array_equal(exact_ect(g, dirs, grid).entries,
                                          exact_ect(h, dirs, grid).entries)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dim"):
            exact_ect(segment(), DirectionSet([[1.0, 0.0, 0.0]]),
                      ThresholdGrid([0.0]))


def _suite_graphs(n=20, seed=77, max_nodes=4):
    # small graphs keep the sigmoid-tail sum well under the tolerances;
    # each projection within [0.05, 0.1] of a threshold costs ~0.17 at
    # sharpness 32, so dense graphs would stack several such terms
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        g = random_graph(rng, max_nodes=max_nodes)
        out.append(build_graph(g.num_nodes, g.edges,
                               normalize_features(g.features)))
    return out


def _separated_columns(g, dirs, grid, gap=0.05):
    """Threshold columns at distance >= gap from every projection value."""
    P = dirs.vectors @ g.features.T
    vals = [P]
    if g.edges:
        e = np.asarray(g.edges)
        vals.append(np.maximum(P[:, e[:, 0]], P[:, e[:, 1]]))
    vals = np.concatenate(vals, axis=1)  # (nd, n+E)
    dist = np.abs(grid.values[None, :, None] - vals[:, None, :]).min(axis=2)
    return dist >= gap  # (nd, nt)


class TestSmoothEct:
    def test_approaches_exact_with_sharpness(self):
        grid = ThresholdGrid.uniform(16)
        dirs = sample_directions(2, 8, seed=5)
        for lam, tol in ((32.0, 0.2), (128.0, 0.05)):
            for g in _suite_graphs():
                ok = _separated_columns(g, dirs, grid)
                gap = np.abs(smooth_ect(g, dirs, grid, lam).entries.data -
                             exact_ect(g, dirs, grid).entries)
                assert gap[ok].max() < tol

    def test_very_sharp_on_eight_node_graphs(self):
        grid = ThresholdGrid.uniform(16)
        dirs = sample_directions(2, 8, seed=5)
        for g in _suite_graphs(max_nodes=8, seed=78):
            ok = _separated_columns(g, dirs, grid)
            gap = np.abs(smooth_ect(g, dirs, grid, 128.0).entries.data -
                         exact_ect(g, dirs, grid).entries)
            if ok.any():
                assert gap[ok].max() < 0.05

    def test_single_node_at_threshold_gives_half(self):
        g = build_graph(1, [], [[0.25, 0.0]])
        M = smooth_ect(g, DirectionSet([[1.0, 0.0]]), ThresholdGrid([0.25]))
        assert M.entries.data[0, 0] == pytest.approx(0.5)

    def test_entries_bounded_by_counts(self, rng):
        grid = ThresholdGrid.uniform(12)
        for _ in range(20):
            g = random_graph(rng, max_nodes=10)
            dirs = sample_directions(2, 4, seed=int(rng.integers(1 << 30)))
            E = smooth_ect(g, dirs, grid).entries.data
            assert E.min() > -g.num_edges - 1e-9
            assert E.max() < g.num_nodes + 1e-9

    def test_rejects_nonpositive_sharpness(self):
        with pytest.raises(ValueError):
            smooth_ect(segment(), DirectionSet([[1.0, 0.0]]),
                       ThresholdGrid([0.0]), sharpness=0.0)

    def test_gradient_wrt_directions(self):
        rng = np.random.default_rng(21)
        g = build_graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)],
                        normalize_features(rng.standard_normal((4, 2))))
        dirs = sample_directions(2, 3, seed=4, trainable=True)
        grid = ThresholdGrid.uniform(7)
        w = rng.standard_normal((3, 7))

        def f(params):
            M = smooth_ect(g, dirs, grid, sharpness=8.0)
            return ad.vsum(M.entries * ad.Value(w))

        assert finite_difference_check(f, [dirs.param]) < 1e-4

    def test_gradient_wrt_features(self):
        rng = np.random.default_rng(22)
        g = build_graph(3, [(0, 1), (1, 2)],
                        normalize_features(rng.standard_normal((3, 2))))
        dirs = sample_directions(2, 4, seed=6)
        grid = ThresholdGrid.uniform(6)
        feats = Parameter(g.features.copy())
        w = rng.standard_normal((4, 6))

        def f(params):
            M = smooth_ect(g, dirs, grid, sharpness=8.0,
                           features_value=params[0].value)
            return ad.vsum(M.entries * ad.Value(w))

        assert finite_difference_check(f, [feats]) < 1e-4

    def test_untrainable_directions_get_no_gradient(self):
        dirs = sample_directions(2, 3, seed=1)
        M = smooth_ect(segment(), dirs, ThresholdGrid.uniform(5))
        backward(ad.vsum(M.entries))
        assert dirs.param.value.grad is None


class TestLocalEct:
    def test_singleton_neighborhood(self):
        g = build_graph(3, [(1, 2)], np.eye(3))
        M = local_ect(g, 0, 1, DirectionSet([[1.0, 0.0, 0.0]]),
                      ThresholdGrid([-0.5, 0.5]))
        # isolated node: normalized feature is the origin, no edges
        np.testing.assert_array_equal(M.entries, [[0, 1]])

    def test_matches_manual_pipeline(self, rng):
        grid = ThresholdGrid.uniform(9)
        dirs = sample_directions(2, 5, seed=8)
        for _ in range(10):
            g = random_graph(rng, max_nodes=8)
            v = int(rng.integers(g.num_nodes))
            sub = m_hop_neighborhood(g, v, 2)
            expect = exact_ect(
                build_graph(sub.num_nodes, sub.edges,
                            normalize_features(sub.features)), dirs, grid)
            got = local_ect(g, v, 2, dirs, grid, mode="exact")
            np.testing.assert_array_equal(got.entries, expect.entries)

    def test_translation_and_scale_invariance(self, rng):
        grid = ThresholdGrid.uniform(9)
        dirs = sample_directions(2, 5, seed=8)
        g = random_graph(rng, max_nodes=8)
        h = build_graph(g.num_nodes, g.edges, 3.0 * g.features + [10.0, -2.0])
        for v in range(g.num_nodes):
            a = local_ect(g, v, 1, dirs, grid, mode="smoothed").entries.data
            b = local_ect(h, v, 1, dirs, grid, mode="smoothed").entries.data
            np.testing.assert_allclose(a, b, atol=1e-9)

    def test_rejects_bad_arguments(self):
        g = segment()
        dirs = DirectionSet([[1.0, 0.0]])
        grid = ThresholdGrid([0.0])
        with pytest.raises(ValueError):
            local_ect(g, 0, 0, dirs, grid)
        with pytest.raises(ValueError):
            local_ect(g, 0, 1, dirs, grid, mode="fuzzy")
