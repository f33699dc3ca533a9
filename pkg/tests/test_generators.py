import json

import numpy as np
import pytest

from agvoter import Configuration, Graph
from agvoter.errors import (
    AllAgnostic,
    DisconnectedAfterRetries,
    InvalidSpec,
    IsolatedNode,
    ParseError,
    StrongConnectivityWarning,
    TargetTooLarge,
)
from agvoter.generators import (
    GeneratorSpec,
    InitialConfigSpec,
    config_from_json,
    config_to_json,
    default_colour_names,
    generate,
    graph_from_json,
    graph_to_json,
    initial_configuration,
    load_edge_list,
    path_graph,
    sample_connected_subgraph,
)
from agvoter.graphs import is_strongly_connected


class TestFamilies:
    def test_clique(self):
        g = generate(GeneratorSpec(family="clique", n=6))
        assert g.edge_count == 30
        assert g.max_out_degree == 5
        assert np.all(g._row_uniform)

    @pytest.mark.parametrize("n", [3, 5, 101])
    def test_cycle(self, n):
        g = generate(GeneratorSpec(family="cycle", n=n))
        assert g.is_uniform_ring()
        assert is_strongly_connected(g)

    @pytest.mark.parametrize("n", [4, 10])
    def test_even_cycle_rejected(self, n):
        # even rings oscillate forever under synchronous pulls
        with pytest.raises(InvalidSpec):
            generate(GeneratorSpec(family="cycle", n=n))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_erdos_renyi_connected_and_uniform(self, seed):
        g = generate(GeneratorSpec(family="erdos_renyi", n=60, p=0.15, seed=seed))
        assert is_strongly_connected(g)
        assert np.all(g._row_uniform)

    def test_erdos_renyi_edge_count_in_range(self):
        # n=150, p=0.3: mean 3352.5 crossing pairs, sd ~ 48; 4 sd window
        g = generate(GeneratorSpec(family="erdos_renyi", n=150, p=0.3, seed=5))
        pairs = g.edge_count // 2
        mean = 150 * 149 / 2 * 0.3
        sd = np.sqrt(150 * 149 / 2 * 0.3 * 0.7)
        assert abs(pairs - mean) < 4 * sd

    def test_erdos_renyi_determinism(self):
        a = generate(GeneratorSpec(family="erdos_renyi", n=40, p=0.2, seed=9))
        b = generate(GeneratorSpec(family="erdos_renyi", n=40, p=0.2, seed=9))
        assert a == b

    def test_sparse_p_warns(self):
        # p * n / log(n) = 0.958 <= 1 triggers the sparse-regime warning but
        # mean degree 3.7 still connects within the retry budget
        with pytest.warns(UserWarning):
            generate(GeneratorSpec(family="erdos_renyi", n=50, p=0.075, seed=0))

    @pytest.mark.filterwarnings("ignore::UserWarning")
    def test_disconnected_after_retries(self):
        with pytest.raises(DisconnectedAfterRetries):
            generate(GeneratorSpec(family="erdos_renyi", n=200, p=0.001, seed=0))

    def test_sbm_blocks(self):
        g = generate(
            GeneratorSpec(
                family="sbm", n=60, community_size=30, intra_p=1.0, inter_p=0.1, seed=2
            )
        )
        assert is_strongly_connected(g)
        # intra_p=1 means both 30-cliques are fully present
        pairs = {tuple(p) for p in g.undirected_pairs().tolist()}
        for u in range(30):
            for v in range(u + 1, 30):
                assert (u, v) in pairs

    def test_sbm_validation(self):
        with pytest.raises(InvalidSpec):
            generate(GeneratorSpec(family="sbm", n=10, community_size=3))

    def test_unknown_family(self):
        with pytest.raises(InvalidSpec):
            generate(GeneratorSpec(family="torus", n=5))

    def test_path_graph(self):
        g = path_graph(5)
        assert g.out_degree(0) == 1
        assert g.out_degree(2) == 2
        assert is_strongly_connected(g)


class TestEdgeListIO:
    def test_pairs_format(self, tmp_path):
        p = tmp_path / "pairs.txt"
        p.write_text("# comment\n10 20\n20 30\n30 10\n20 30\n")
        g = load_edge_list(p)
        assert g.n == 3
        assert np.array_equal(g.node_labels, [10, 20, 30])
        assert g.edge_count == 6  # duplicate line collapsed

    def test_weighted_format(self, tmp_path):
        p = tmp_path / "w.txt"
        p.write_text("0 1 0.75\n0 2 0.25\n1 0 1.0\n2 0 1.0\n")
        g = load_edge_list(p)
        targets, weights = g.out_edges(0)
        assert np.array_equal(targets, [1, 2])
        assert np.allclose(weights, [0.75, 0.25])

    def test_mixed_columns_raise(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("0 1\n1 0 0.5\n")
        with pytest.raises(ParseError) as err:
            load_edge_list(p)
        assert err.value.context["line"] == 2

    def test_isolated_node_in_weighted(self, tmp_path):
        p = tmp_path / "iso.txt"
        p.write_text("0 1 1.0\n")
        with pytest.raises(IsolatedNode):
            load_edge_list(p)

    def test_weak_connectivity_warns(self, tmp_path):
        p = tmp_path / "weak.txt"
        p.write_text("0 1\n2 3\n")
        with pytest.warns(StrongConnectivityWarning):
            load_edge_list(p)

    def test_graph_json_roundtrip(self, pendant_graph):
        doc = graph_to_json(pendant_graph)
        back = graph_from_json(doc)
        assert back == pendant_graph
        assert graph_to_json(back) == doc

    def test_config_json_roundtrip(self, pendant_config):
        doc = config_to_json(pendant_config)
        back = config_from_json(doc)
        assert back == pendant_config
        parsed = json.loads(doc)
        assert parsed["k"] == 2
        assert parsed["n"] == 4


class TestSubgraphSampling:
    def test_connected_and_sized(self):
        g = generate(GeneratorSpec(family="erdos_renyi", n=120, p=0.08, seed=1))
        sub = sample_connected_subgraph(g, 40, seed=3)
        assert sub.n == 40
        assert is_strongly_connected(sub)
        assert sub.node_labels is not None

    def test_determinism(self):
        g = generate(GeneratorSpec(family="erdos_renyi", n=120, p=0.08, seed=1))
        a = sample_connected_subgraph(g, 25, seed=7)
        b = sample_connected_subgraph(g, 25, seed=7)
        assert a == b and np.array_equal(a.node_labels, b.node_labels)

    def test_edges_are_induced(self):
        g = generate(GeneratorSpec(family="erdos_renyi", n=60, p=0.2, seed=4))
        sub = sample_connected_subgraph(g, 20, seed=0)
        orig = {tuple(p) for p in g.undirected_pairs().tolist()}
        lab = sub.node_labels
        for u, v in sub.undirected_pairs().tolist():
            a, b = int(lab[u]), int(lab[v])
            assert (min(a, b), max(a, b)) in orig

    def test_target_too_large(self):
        g = generate(GeneratorSpec(family="clique", n=5))
        with pytest.raises(TargetTooLarge):
            sample_connected_subgraph(g, 6)


class TestInitialConfiguration:
    def test_fractions_counts_and_determinism(self):
        spec = InitialConfigSpec(kind="fractions", fractions=(0.05, 0.05), seed=11)
        cfg = initial_configuration(1001, spec)
        assert cfg.counts[1] == 50 and cfg.counts[2] == 50
        cfg2 = initial_configuration(1001, spec)
        assert cfg == cfg2

    def test_fraction_floor_not_bitten_by_float(self):
        # 0.05 * 3001 = 150.05000000000001; naive floor of the float error
        # side would give 149
        cfg = initial_configuration(
            3001, InitialConfigSpec(kind="fractions", fractions=(0.05, 0.05))
        )
        assert cfg.counts[1] == 150

    def test_arcs_are_contiguous(self):
        cfg = initial_configuration(
            10, InitialConfigSpec(kind="arcs", fractions=(0.3, 0.2))
        )
        assert np.array_equal(
            cfg.states, [1, 1, 1, 2, 2, 0, 0, 0, 0, 0]
        )

    def test_explicit_states(self):
        cfg = initial_configuration(
            3, InitialConfigSpec(kind="explicit", states=(1, 0, 2), k=2)
        )
        assert np.array_equal(cfg.states, [1, 0, 2])

    def test_all_agnostic_rejected(self):
        with pytest.raises(AllAgnostic):
            initial_configuration(
                50, InitialConfigSpec(kind="fractions", fractions=(0.001, 0.001))
            )

    def test_bad_fractions(self):
        with pytest.raises(InvalidSpec):
            InitialConfigSpec(kind="fractions", fractions=(0.7, 0.7)).validate()

    def test_colour_names(self):
        assert default_colour_names(2) == ["red", "blue"]
        assert len(set(default_colour_names(9))) == 9
