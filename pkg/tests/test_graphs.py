import numpy as np
import pytest

from agvoter import Graph
from agvoter.errors import (
    DimensionMismatch,
    EmptyGraph,
    InvalidGraph,
    NotStronglyConnected,
)
from agvoter.graphs import (
    check_reversibility,
    edge_boundary,
    is_strongly_connected,
    stationary_distribution,
)

from conftest import PENDANT_MU, ROTOR_VIOLATION


class TestGraphConstruction:
    def test_from_edges_sorts_rows(self):
        # rows given out of order; constructor canonicalizes by target
        g = Graph.from_edges(3, [(0, 2, 0.5), (0, 1, 0.5), (1, 0, 1.0), (2, 0, 1.0)])
        assert np.array_equal(g.indptr, [0, 2, 3, 4])
        assert np.array_equal(g.indices, [1, 2, 0, 0])
        assert np.allclose(g.weights, [0.5, 0.5, 1.0, 1.0])

    def test_tiny_drift_renormalized(self):
        g = Graph.from_edges(2, [(0, 1, 1.0 + 5e-7), (1, 0, 1.0)])
        assert g.weights[0] == 1.0

    def test_row_sums_pinned_to_one(self):
        rng = np.random.default_rng(7)
        w = rng.random(5) + 0.1
        w /= w.sum()
        edges = [(0, j + 1, w[j]) for j in range(5)] + [
            (j, 0, 1.0) for j in range(1, 6)
        ]
        g = Graph.from_edges(6, edges)
        assert np.all(g.row_cum[g.indptr[1:] - 1] == 1.0)

    def test_rejects_sink_node(self):
        with pytest.raises(InvalidGraph):
            Graph.from_edges(2, [(0, 1, 1.0)])

    def test_rejects_duplicate_edge(self):
        with pytest.raises(InvalidGraph):
            Graph.from_edges(2, [(0, 1, 0.5), (0, 1, 0.5), (1, 0, 1.0)])

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(InvalidGraph):
            Graph.from_edges(2, [(0, 1, 0.0), (1, 0, 1.0)])

    def test_rejects_bad_row_sum(self):
        with pytest.raises(InvalidGraph) as err:
            Graph.from_matrix(np.array([[0.0, 0.4], [1.0, 0.0]]))
        assert err.value.context["node"] == 0

    def test_from_matrix_matches_from_edges(self):
        m = np.array([[0.0, 0.5, 0.5], [1.0, 0.0, 0.0], [0.5, 0.5, 0.0]])
        g1 = Graph.from_matrix(m)
        g2 = Graph.from_edges(
            3, [(i, j, m[i, j]) for i in range(3) for j in range(3) if m[i, j] > 0]
        )
        assert g1 == g2
        assert hash(g1) == hash(g2)

    def test_undirected_uniform_degree_weights(self):
        g = Graph.undirected_uniform(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
        assert g.out_degree(0) == 3
        targets, weights = g.out_edges(0)
        assert np.array_equal(targets, [1, 2, 3])
        assert np.allclose(weights, 1 / 3)

    def test_self_loop_counted_once(self):
        g = Graph.undirected_uniform(2, [(0, 0), (0, 1)])
        targets, weights = g.out_edges(0)
        assert np.array_equal(targets, [0, 1])
        assert np.allclose(weights, 0.5)

    def test_arrays_read_only(self):
        g = Graph.from_edges(2, [(0, 1, 1.0), (1, 0, 1.0)])
        with pytest.raises(ValueError):
            g.weights[0] = 2.0

    @pytest.mark.parametrize("n", [3, 5, 64, 67])
    def test_is_uniform_ring(self, n):
        pairs = [(v, (v + 1) % n) for v in range(n)]
        g = Graph.undirected_uniform(n, [(min(a, b), max(a, b)) for a, b in pairs])
        assert g.is_uniform_ring()

    def test_ring_rejects_non_ring(self):
        g = Graph.undirected_uniform(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
        assert not g.is_uniform_ring()
        path = Graph.undirected_uniform(4, [(0, 1), (1, 2), (2, 3)])
        assert not path.is_uniform_ring()


class TestStationary:
    def test_pendant_exact(self, pendant_graph):
        sd = stationary_distribution(pendant_graph)
        assert np.allclose(sd.mu, PENDANT_MU, atol=1e-12)
        assert sd.residual <= 1e-10

    def test_rotor_uniform(self, rotor_graph):
        sd = stationary_distribution(rotor_graph)
        assert np.allclose(sd.mu, 1 / 3, atol=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_power_iteration_matches_dense(self, seed):
        # same graph through both solvers; power path forced via monkey knob
        from agvoter import graphs as G

        rng = np.random.default_rng(seed)
        n = 40
        m = rng.random((n, n)) * (rng.random((n, n)) < 0.2)
        np.fill_diagonal(m, 0.1)
        m /= m.sum(axis=1, keepdims=True)
        g = Graph.from_matrix(m)
        dense = stationary_distribution(g)
        old = G.DIRECT_SOLVE_MAX_N
        G.DIRECT_SOLVE_MAX_N = 10
        try:
            power = stationary_distribution(g)
        finally:
            G.DIRECT_SOLVE_MAX_N = old
        assert power.method == "power-iteration"
        assert np.allclose(dense.mu, power.mu, atol=1e-8)

    def test_periodic_chain_converges(self):
        # 2-cycle is periodic; the lazy iteration must still converge
        from agvoter import graphs as G

        g = Graph.from_edges(2, [(0, 1, 1.0), (1, 0, 1.0)])
        old = G.DIRECT_SOLVE_MAX_N
        G.DIRECT_SOLVE_MAX_N = 1
        try:
            sd = stationary_distribution(g)
        finally:
            G.DIRECT_SOLVE_MAX_N = old
        assert np.allclose(sd.mu, 0.5, atol=1e-9)

    def test_not_strongly_connected_raises(self):
        g = Graph.from_edges(3, [(0, 1, 1.0), (1, 0, 1.0), (2, 2, 1.0)])
        assert not is_strongly_connected(g)
        with pytest.raises(NotStronglyConnected):
            stationary_distribution(g)

    def test_empty_graph_raises(self):
        with pytest.raises(EmptyGraph):
            stationary_distribution(Graph(np.zeros(1, dtype=np.int64), [], []))


class TestReversibility:
    def test_undirected_uniform_reversible(self, pendant_graph):
        rep = check_reversibility(pendant_graph, stationary_distribution(pendant_graph))
        assert rep.reversible
        assert rep.worst_violation[2] <= 1e-12

    def test_rotor_violation_frozen(self, rotor_graph):
        rep = check_reversibility(rotor_graph, stationary_distribution(rotor_graph))
        assert not rep.reversible
        v, w, gap = rep.worst_violation
        assert (v, w) == ROTOR_VIOLATION[:2]
        assert gap == pytest.approx(ROTOR_VIOLATION[2], abs=1e-12)

    def test_accepts_plain_mu_array(self, rotor_graph):
        rep = check_reversibility(rotor_graph, np.full(3, 1 / 3))
        assert not rep.reversible

    def test_dimension_mismatch(self, rotor_graph):
        with pytest.raises(DimensionMismatch):
            check_reversibility(rotor_graph, np.full(4, 0.25))


class TestEdgeBoundary:
    def test_complete_graph_exhaustive(self):
        # K_n has exactly s*(n-s) crossing edges for any subset, p = 1
        from itertools import combinations

        n = 9
        g = Graph.undirected_uniform(
            n, [(u, v) for u in range(n) for v in range(u + 1, n)]
        )
        for s in range(1, n):
            for subset in combinations(range(n), s):
                chk = edge_boundary(g, np.array(subset), p=1.0)
                assert chk.boundary_edges == s * (n - s)
                assert chk.expected == pytest.approx(s * (n - s))
                assert chk.within_bound

    def test_subset_validation(self):
        g = Graph.undirected_uniform(3, [(0, 1), (1, 2), (0, 2)])
        with pytest.raises(DimensionMismatch):
            edge_boundary(g, np.array([0, 7]), p=1.0)
        with pytest.raises(ValueError):
            edge_boundary(g, np.array([0]), p=0.0)

    @pytest.mark.parametrize("seed,size", [(0, 50), (1, 100), (2, 500)])
    def test_er_subsets_concentrate(self, seed, size):
        from agvoter.generators import GeneratorSpec, generate

        g = generate(GeneratorSpec(family="erdos_renyi", n=1000, p=0.05, seed=3))
        rng = np.random.default_rng(seed)
        subset = rng.choice(1000, size=size, replace=False)
        chk = edge_boundary(g, subset, p=0.05)
        assert chk.within_bound
        assert chk.expected == pytest.approx((1000 - size) * size * 0.05)
