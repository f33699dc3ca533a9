import csv
import math

import numpy as np
import pytest

from agvoter import (
    BLUE,
    RED,
    Configuration,
    Graph,
    Protocol,
    default_round_cap,
    run,
    step,
    step_distribution,
)
from agvoter import _kernels
from agvoter.errors import (
    AllAgnostic,
    CapWithoutProgress,
    DimensionMismatch,
    ProtocolMismatch,
)

from conftest import PENDANT_S0, ROTOR_S0


def cycle_graph(n):
    pairs = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
    return Graph.undirected_uniform(n, pairs)


def one_round(g, cfg, protocol, rng, force=None):
    """One simulated round through run(); a capped stall still yields the
    partial outcome."""
    try:
        out = run(
            g, cfg, protocol, stop="round_cap", round_cap=1, rng=rng,
            _force_kernel=force,
        )
    except CapWithoutProgress as err:
        out = err.outcome
    return out.final_config


def assert_matches_law(tallies, exact, n_runs):
    """Empirical config frequencies against exact probabilities, 4 sigma."""
    for cfg in tallies:
        assert cfg in exact, f"observed config outside exact support: {cfg}"
    for cfg, p in exact.items():
        freq = tallies.get(cfg, 0) / n_runs
        slack = 4.0 * math.sqrt(p * (1 - p) / n_runs) + 2.0 / n_runs
        assert abs(freq - p) <= slack, (cfg, freq, p)


class TestConfiguration:
    def test_counts_and_properties(self):
        cfg = Configuration([0, 1, 2, 1, 0], k=3)
        assert np.array_equal(cfg.counts, [2, 2, 1, 0])
        assert cfg.n == 5
        assert cfg.agnostic_count == 2
        assert cfg.gnostic_count == 3
        assert not cfg.is_all_gnostic
        assert not cfg.is_monochromatic
        assert cfg.winner is None

    def test_k_inference(self):
        assert Configuration([0, 0, 1]).k == 1
        assert Configuration([0, 0, 0]).k == 1
        assert Configuration([2, 1]).k == 2

    def test_monochromatic_winner(self):
        cfg = Configuration([2, 2, 2], k=2)
        assert cfg.is_monochromatic and cfg.winner == BLUE
        assert Configuration([1, 0, 1], k=2).winner is None

    def test_validation(self):
        with pytest.raises(ValueError):
            Configuration([-1, 0])
        with pytest.raises(ValueError):
            Configuration([3, 0], k=2)
        with pytest.raises(ValueError):
            Configuration([1], k=200)
        with pytest.raises(DimensionMismatch):
            Configuration([[1, 0], [0, 1]])

    def test_equality_includes_k(self):
        assert Configuration([1, 0], k=1) != Configuration([1, 0], k=2)
        a = Configuration([1, 2], k=2)
        assert a == Configuration([1, 2]) and hash(a) == hash(Configuration([1, 2]))

    def test_states_read_only(self):
        cfg = Configuration([1, 0])
        with pytest.raises(ValueError):
            cfg.states[0] = 0

    def test_replace_keeps_k(self):
        assert Configuration([1, 0], k=5).replace([0, 1]).k == 5


class TestProtocol:
    @pytest.mark.parametrize(
        "name, proto",
        [
            ("sync-pull", Protocol.SYNC_PULL),
            ("SYNC_PULL", Protocol.SYNC_PULL),
            ("Async-Pull", Protocol.ASYNC_PULL),
            ("async_push_pull", Protocol.ASYNC_PUSH_PULL),
        ],
    )
    def test_from_name(self, name, proto):
        assert Protocol.from_name(name) is proto
        assert Protocol.from_name(proto) is proto

    def test_sync_push_rejected(self):
        # pushes are defined for sequential updates only
        with pytest.raises(ProtocolMismatch):
            Protocol.from_name("sync-push")

    def test_flags(self):
        assert not Protocol.SYNC_PULL.is_async
        assert Protocol.ASYNC_PULL.is_async
        assert Protocol.ASYNC_PUSH.uses_push
        assert Protocol.ASYNC_PUSH_PULL.uses_push
        assert not Protocol.ASYNC_PULL.uses_push


class TestStepDistribution:
    def test_pendant_sync_masses(self, pendant_graph, pendant_config):
        # independent per-node supports: nodes 0 and 1 split 1/2 each, node 2
        # keeps red with 2/3, node 3 turns red surely; 8 outcomes
        dist = step_distribution(pendant_graph, pendant_config, "sync-pull")
        assert len(dist) == 8
        masses = sorted(dist.values())
        assert np.allclose(masses, [1 / 12] * 4 + [1 / 6] * 4)
        assert dist[Configuration([1, 1, 1, 1], k=2)] == pytest.approx(1 / 6)
        assert Configuration([2, 2, 2, 2], k=2) not in dist

    def test_pendant_async_pull_self_mass(self, pendant_graph, pendant_config):
        dist = step_distribution(pendant_graph, pendant_config, "async-pull")
        assert dist[pendant_config] == pytest.approx(7 / 24)
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)

    def test_pendant_async_push_self_mass(self, pendant_graph, pendant_config):
        # only the two gnostic nodes can act; agnostic selections change nothing
        dist = step_distribution(pendant_graph, pendant_config, "async-push")
        assert dist[pendant_config] == pytest.approx(1 / 2)
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)

    def test_rotor_sync_exact(self, rotor_graph, rotor_config):
        dist = step_distribution(rotor_graph, rotor_config, "sync-pull")
        expected = {
            Configuration([1, 2, 1], k=2): 0.25,
            Configuration([1, 2, 0], k=2): 0.25,
            Configuration([2, 2, 1], k=2): 0.25,
            Configuration([2, 2, 0], k=2): 0.25,
        }
        assert dist.keys() == expected.keys()
        for cfg, p in expected.items():
            assert dist[cfg] == pytest.approx(p)

    def test_push_pull_sums_to_one(self, pendant_graph, pendant_config):
        dist = step_distribution(pendant_graph, pendant_config, "async-push-pull")
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)


class TestStepMatchesLaw:
    @pytest.mark.parametrize(
        "protocol, seed",
        [
            ("sync-pull", 101),
            ("async-pull", 102),
            ("async-push", 103),
            ("async-push-pull", 104),
        ],
    )
    def test_step_empirical(self, pendant_graph, pendant_config, protocol, seed):
        exact = step_distribution(pendant_graph, pendant_config, protocol)
        rng = np.random.default_rng(seed)
        n_runs = 2000
        tallies = {}
        for _ in range(n_runs):
            nxt = step(pendant_graph, pendant_config, protocol, rng)
            tallies[nxt] = tallies.get(nxt, 0) + 1
        assert_matches_law(tallies, exact, n_runs)


class TestKernelsMatchLaw:
    @pytest.mark.parametrize(
        "protocol, force, seed",
        [
            ("sync-pull", "sweep", 201),
            ("sync-pull", "active", 202),
            ("async-pull", None, 203),
            ("async-push", None, 204),
            ("async-push-pull", None, 205),
        ],
    )
    def test_one_round_kernel(self, pendant_graph, pendant_config, protocol, force, seed):
        exact = step_distribution(pendant_graph, pendant_config, protocol)
        rng = np.random.default_rng(seed)
        n_runs = 2500
        tallies = {}
        for _ in range(n_runs):
            cfg = one_round(pendant_graph, pendant_config, protocol, rng, force)
            tallies[cfg] = tallies.get(cfg, 0) + 1
        assert_matches_law(tallies, exact, n_runs)


class TestRingKernel:
    @pytest.mark.parametrize("n", [64, 67, 130])
    def test_pack_roundtrip(self, n):
        rng = np.random.default_rng(n)
        states = rng.integers(1, 3, size=n).astype(np.int8)
        bits = _kernels.pack_ring_bits(states, RED)
        assert bits.dtype == np.uint64
        assert _kernels.count_ring_bits(bits, bits.shape[0]) == int(
            np.count_nonzero(states == RED)
        )
        back = np.zeros(n, dtype=np.int8)
        _kernels.unpack_ring_bits(bits, back, RED, BLUE)
        assert np.array_equal(back, states)

    @pytest.mark.parametrize("pos", [0, 31, 63, 64, 66])
    def test_single_red_one_round(self, pos):
        # with one red node only its two ring neighbours can be red next
        # round, each independently with probability 1/2
        n = 67
        trials = 1500
        rng = np.random.default_rng(1000 + pos)
        left_hits = right_hits = both = 0
        states = np.full(n, BLUE, dtype=np.int8)
        states[pos] = RED
        unpacked = np.zeros(n, dtype=np.int8)
        allowed = {(pos - 1) % n, (pos + 1) % n}
        for _ in range(trials):
            bits = _kernels.pack_ring_bits(states, RED)
            scratch = np.empty_like(bits)
            _kernels.ring_sync(bits, scratch, n, 1, rng)
            _kernels.unpack_ring_bits(bits, unpacked, RED, BLUE)
            reds = set(np.flatnonzero(unpacked == RED).tolist())
            assert reds <= allowed
            lhit = (pos - 1) % n in reds
            rhit = (pos + 1) % n in reds
            left_hits += lhit
            right_hits += rhit
            both += lhit and rhit
        slack = 4.0 * math.sqrt(0.25 / trials)
        assert abs(left_hits / trials - 0.5) <= slack
        assert abs(right_hits / trials - 0.5) <= slack
        assert abs(both / trials - 0.25) <= slack + 2 / trials

    def test_ring_and_sweep_agree_on_win_probability(self):
        # uniform ring, one red node: red wins with the stationary mass 1/n
        n = 25
        g = cycle_graph(n)
        states = np.full(n, BLUE, dtype=np.int8)
        states[7] = RED
        s0 = Configuration(states, k=2)
        trials = 1500
        p = 1.0 / n
        slack = 4.0 * math.sqrt(p * (1 - p) / trials)
        wins = {}
        for label, force in [("ring", None), ("sweep", "sweep")]:
            rng = np.random.default_rng(42)
            red = 0
            for _ in range(trials):
                out = run(g, s0, "sync-pull", stop="consensus", rng=rng,
                          _force_kernel=force)
                red += out.winner == RED
            wins[label] = red / trials
            assert abs(wins[label] - p) <= slack, (label, wins[label])
        assert abs(wins["ring"] - wins["sweep"]) <= 4.0 * math.sqrt(
            2 * p * (1 - p) / trials
        )


class TestRun:
    def test_consensus_stop(self, pendant_graph, pendant_config):
        rng = np.random.default_rng(7)
        out = run(pendant_graph, pendant_config, "sync-pull", stop="consensus",
                  rng=rng)
        assert out.winner in (RED, BLUE)
        assert out.final_config.is_monochromatic
        assert not out.capped
        assert out.t_consensus is not None
        assert out.t_agnostic is not None
        assert out.t_agnostic <= out.t_consensus == out.rounds_executed

    def test_all_gnostic_stop(self, pendant_graph, pendant_config):
        rng = np.random.default_rng(8)
        out = run(pendant_graph, pendant_config, "async-pull",
                  stop="all_gnostic", rng=rng)
        assert out.final_config.agnostic_count == 0
        assert out.t_agnostic == out.rounds_executed
        assert not out.capped

    def test_monochromatic_start_halts_every_mode(self, pendant_graph):
        s0 = Configuration([1, 1, 1, 1], k=2)
        for stop in ("all_gnostic", "consensus", "round_cap"):
            out = run(pendant_graph, s0, "async-pull", stop=stop,
                      rng=np.random.default_rng(0), round_cap=50)
            assert out.rounds_executed == 0
            assert out.t_consensus == 0 and out.winner == RED
            assert not out.capped

    def test_all_gnostic_start_is_immediate(self, pendant_graph):
        s0 = Configuration([1, 2, 1, 2], k=2)
        out = run(pendant_graph, s0, "sync-pull", stop="all_gnostic",
                  rng=np.random.default_rng(0))
        assert out.rounds_executed == 0 and out.t_agnostic == 0
        assert out.t_consensus is None and out.winner is None

    @pytest.mark.parametrize("force", [None, "sweep"])
    def test_even_ring_parity_oscillation(self, force):
        # alternating colours on an even ring flip deterministically each
        # round and never reach consensus; the cap parity fixes the phase
        g = cycle_graph(4)
        s0 = Configuration([1, 2, 1, 2], k=2)
        out = run(g, s0, "sync-pull", stop="consensus", round_cap=50,
                  rng=np.random.default_rng(3), _force_kernel=force)
        assert out.capped and out.winner is None
        assert out.rounds_executed == 50
        assert np.array_equal(out.final_config.states, [1, 2, 1, 2])
        out2 = run(g, s0, "sync-pull", stop="consensus", round_cap=51,
                   rng=np.random.default_rng(3), _force_kernel=force)
        assert np.array_equal(out2.final_config.states, [2, 1, 2, 1])

    def test_cap_without_progress(self):
        # node 1 is agnostic and only ever pulls itself, so it can never
        # become gnostic; the stall guard must fire with the partial outcome
        g = Graph.from_edges(2, [(0, 0, 1.0), (1, 1, 1.0)])
        s0 = Configuration([1, 0], k=2)
        with pytest.raises(CapWithoutProgress) as err:
            run(g, s0, "async-pull", stop="all_gnostic", round_cap=200,
                rng=np.random.default_rng(1))
        out = err.value.outcome
        assert out.capped and out.rounds_executed == 200
        assert out.final_config.agnostic_count == 1
        assert err.value.context["agnostic"] == 1

    def test_all_agnostic_rejected(self, pendant_graph):
        with pytest.raises(AllAgnostic):
            run(pendant_graph, Configuration([0, 0, 0, 0], k=2), "async-pull")

    def test_dimension_mismatch(self, pendant_graph):
        with pytest.raises(DimensionMismatch):
            run(pendant_graph, Configuration([1, 2], k=2), "async-pull")

    @pytest.mark.parametrize(
        "protocol", ["sync-pull", "async-pull", "async-push", "async-push-pull"]
    )
    def test_determinism(self, pendant_graph, pendant_config, protocol):
        def go():
            rng = np.random.default_rng(np.random.SeedSequence(55))
            return run(pendant_graph, pendant_config, protocol,
                       stop="consensus", rng=rng)

        a, b = go(), go()
        assert np.array_equal(a.final_config.states, b.final_config.states)
        assert (a.t_agnostic, a.t_consensus, a.rounds_executed, a.winner) == (
            b.t_agnostic, b.t_consensus, b.rounds_executed, b.winner
        )

    def test_ring_path_determinism(self):
        g = cycle_graph(67)
        rng = np.random.default_rng(9)
        states = (rng.integers(0, 2, size=67) + 1).astype(np.int8)
        s0 = Configuration(states, k=2)

        def go():
            return run(g, s0, "sync-pull", stop="consensus",
                       rng=np.random.default_rng(np.random.SeedSequence(12)))

        a, b = go(), go()
        assert a.t_consensus == b.t_consensus and a.winner == b.winner

    def test_dense_switch_matches_consensus(self):
        # force the active kernel on a dense-active instance; the mid-run
        # switch to sweeps must still deliver a clean consensus outcome
        g = cycle_graph(65)
        states = np.full(65, BLUE, dtype=np.int8)
        states[::2] = RED
        s0 = Configuration(states, k=2)
        out = run(g, s0, "sync-pull", stop="consensus",
                  rng=np.random.default_rng(2), _force_kernel="active")
        assert out.winner in (RED, BLUE) and not out.capped


class TestTrace:
    def test_trace_csv(self, pendant_graph, pendant_config, tmp_path):
        path = tmp_path / "trace.csv"
        out = run(pendant_graph, pendant_config, "sync-pull", stop="consensus",
                  rng=np.random.default_rng(4), trace_path=path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["round", "agnostic", "colour_1", "colour_2"]
        body = [[int(x) for x in row] for row in rows[1:]]
        assert body[0] == [0, 2, 1, 1]
        assert [r[0] for r in body] == list(range(len(body)))
        assert all(sum(r[1:]) == 4 for r in body)
        assert body[-1][0] == out.rounds_executed
        final = out.final_config
        assert body[-1][1:] == [int(c) for c in final.counts]

    def test_trace_every(self, tmp_path):
        g = cycle_graph(4)
        s0 = Configuration([1, 2, 1, 2], k=2)
        path = tmp_path / "trace.csv"
        run(g, s0, "sync-pull", stop="consensus", round_cap=10,
            rng=np.random.default_rng(0), trace_path=path, trace_every=3)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        assert [int(r[0]) for r in rows] == [0, 3, 6, 9, 10]

    def test_trace_every_validation(self, pendant_graph, pendant_config):
        with pytest.raises(ValueError):
            run(pendant_graph, pendant_config, "sync-pull", trace_every=0)


class TestRoundCap:
    def test_default_round_cap_formula(self):
        assert default_round_cap(10, Protocol.SYNC_PULL) == math.ceil(
            10**4 * 10 * math.log(10)
        )
        assert default_round_cap(10, Protocol.ASYNC_PULL) == math.ceil(
            10**4 * 100 * math.log(10)
        )
        assert default_round_cap(1, Protocol.SYNC_PULL) > 0

    def test_negative_cap_rejected(self, pendant_graph, pendant_config):
        with pytest.raises(ValueError):
            run(pendant_graph, pendant_config, "sync-pull", round_cap=-1)

    def test_unknown_stop_rejected(self, pendant_graph, pendant_config):
        with pytest.raises(ValueError):
            run(pendant_graph, pendant_config, "sync-pull", stop="forever")
