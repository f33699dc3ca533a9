"""Pull and push dynamics over coloured node states.

States are small integers: ``0`` marks an agnostic (uncoloured) node and
``1 .. k`` are colours.  Agnostic nodes copy the colour of a sampled
neighbour once that neighbour is gnostic, and gnostic nodes never become
agnostic again, so the number of agnostic nodes is non-increasing.

Four protocols are supported.  ``sync_pull`` updates every node at once,
each sampling one out-neighbour by weight.  ``async_pull`` picks a single
uniform node per round and lets it pull.  ``async_push`` picks a single
uniform node; if gnostic, it overwrites a sampled out-neighbour.
``async_push_pull`` lets one uniform agnostic node pull and one uniform
gnostic node push in the same round (membership read at the start of the
round, the pull applied before the push).  Push variants exist only in
asynchronous form: a synchronous push would need a rule for merging
several simultaneous writes to one node, and no such rule is defined here.
"""

from __future__ import annotations

import csv
import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    AllAgnostic,
    CapWithoutProgress,
    DimensionMismatch,
    ProtocolMismatch,
    TooLargeToEnumerate,
)
from .graphs import Graph

# Hard ceiling on the number of outcomes step_distribution may enumerate.
ENUMERATION_LIMIT = 10**7
# Default round caps: these multiples of n log n (sync) and n^2 log n
# (async) sit far above the expected convergence times of connected graphs.
SYNC_CAP_FACTOR = 10**4
# Fraction of executed rounds at the end of a capped run that must contain
# a gnostic-count change, otherwise the cap is reported as "no progress".
STALL_WINDOW = 0.1

MAX_COLOURS = 127

RED = 1
BLUE = 2


class Protocol(enum.Enum):
    """Update discipline for the dynamics."""

    SYNC_PULL = "sync-pull"
    ASYNC_PULL = "async-pull"
    ASYNC_PUSH = "async-push"
    ASYNC_PUSH_PULL = "async-push-pull"

    @classmethod
    def from_name(cls, name) -> "Protocol":
        if isinstance(name, Protocol):
            return name
        token = str(name).strip().lower().replace("_", "-")
        for proto in cls:
            if proto.value == token:
                return proto
        raise ProtocolMismatch(f"unknown protocol {name!r}", name=str(name))

    @property
    def is_async(self) -> bool:
        return self is not Protocol.SYNC_PULL

    @property
    def uses_push(self) -> bool:
        return self in (Protocol.ASYNC_PUSH, Protocol.ASYNC_PUSH_PULL)


class Configuration:
    """Immutable assignment of states to nodes.

    Parameters
    ----------
    states : array-like of int
        One entry per node; ``0`` = agnostic, ``1..k`` = colours.
    k : int, optional
        Number of colours.  Defaults to ``max(states.max(), 1)`` so a
        configuration can mention fewer colours than it allows.
    """

    __slots__ = ("states", "k", "counts")

    def __init__(self, states, k: int | None = None):
        states = np.ascontiguousarray(states, dtype=np.int8)
        if states.ndim != 1:
            raise DimensionMismatch("states must be a 1-d array")
        if states.size and int(states.min()) < 0:
            raise ValueError("states must be non-negative")
        observed = int(states.max()) if states.size else 0
        if k is None:
            k = max(observed, 1)
        k = int(k)
        if not 1 <= k <= MAX_COLOURS:
            raise ValueError(f"k must lie in [1, {MAX_COLOURS}]")
        if observed > k:
            raise ValueError(f"state {observed} exceeds colour count k={k}")
        states.setflags(write=False)
        counts = np.bincount(states, minlength=k + 1).astype(np.int64)
        counts.setflags(write=False)
        self.states = states
        self.k = k
        self.counts = counts

    @property
    def n(self) -> int:
        return int(self.states.size)

    @property
    def agnostic_count(self) -> int:
        return int(self.counts[0])

    @property
    def gnostic_count(self) -> int:
        return self.n - self.agnostic_count

    @property
    def colour_counts(self) -> np.ndarray:
        return self.counts[1:]

    @property
    def is_all_gnostic(self) -> bool:
        return self.agnostic_count == 0

    @property
    def is_monochromatic(self) -> bool:
        return self.n > 0 and bool(np.max(self.counts[1:]) == self.n)

    @property
    def winner(self) -> int | None:
        if not self.is_monochromatic:
            return None
        return int(np.argmax(self.counts[1:]) + 1)

    def colour_mask(self, colour: int) -> np.ndarray:
        return self.states == colour

    def replace(self, states) -> "Configuration":
        return Configuration(states, k=self.k)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.states, other.states)

    def __hash__(self):
        return hash((self.k, self.states.tobytes()))

    def __repr__(self):
        return f"Configuration({self.states.tolist()}, k={self.k})"


@dataclass(frozen=True)
class RunOutcome:
    """Result of a single trajectory.

    ``t_agnostic`` and ``t_consensus`` are the first rounds at which no
    agnostic node remained and at which all nodes shared one colour; either
    is ``None`` when the run stopped before the event.  ``rounds_executed``
    counts rounds actually simulated; a run that reaches a monochromatic
    state stops there even under a round cap, because no later round can
    change anything.
    """

    t_agnostic: int | None
    t_consensus: int | None
    final_config: Configuration
    winner: int | None
    capped: bool
    rounds_executed: int

    def __post_init__(self):
        if self.t_agnostic is not None and self.t_consensus is not None:
            if self.t_agnostic > self.t_consensus:
                raise ValueError("t_agnostic cannot exceed t_consensus")
        if (self.winner is not None) != self.final_config.is_monochromatic:
            raise ValueError("winner must be set iff the final state is monochromatic")


def _check_graph_config(g: Graph, config: Configuration):
    if config.n != g.n:
        raise DimensionMismatch(
            f"configuration has {config.n} nodes, graph has {g.n}"
        )


def _sample_out(g: Graph, v: int, rng: np.random.Generator) -> int:
    lo, hi = int(g.indptr[v]), int(g.indptr[v + 1])
    r = rng.random()
    return int(g.indices[lo + np.searchsorted(g.row_cum[lo:hi], r, side="right")])


def step(
    g: Graph, config: Configuration, protocol, rng: np.random.Generator
) -> Configuration:
    """Apply one round of the protocol and return the next configuration."""
    protocol = Protocol.from_name(protocol)
    _check_graph_config(g, config)
    s = config.states
    if protocol is Protocol.SYNC_PULL:
        r = rng.random(g.n)
        pos = np.searchsorted(g.global_cumulative(), np.arange(g.n) + r, side="right")
        picked = s[g.indices[pos]]
        new = np.where(picked != 0, picked, s)
        return config.replace(new)
    new = s.copy()
    if protocol is Protocol.ASYNC_PULL:
        v = int(rng.integers(0, g.n))
        u = _sample_out(g, v, rng)
        if s[u] != 0:
            new[v] = s[u]
        return config.replace(new)
    if protocol is Protocol.ASYNC_PUSH:
        v = int(rng.integers(0, g.n))
        if s[v] != 0:
            u = _sample_out(g, v, rng)
            new[u] = s[v]
        return config.replace(new)
    # async push-pull: selections from the round-start membership, the pull
    # applied first so a push onto the same node wins.
    gnostic = np.flatnonzero(s != 0)
    if gnostic.size == 0:
        raise AllAgnostic("push-pull needs at least one gnostic node")
    agnostic = np.flatnonzero(s == 0)
    if agnostic.size:
        a = int(agnostic[rng.integers(0, agnostic.size)])
        ua = _sample_out(g, a, rng)
        if s[ua] != 0:
            new[a] = s[ua]
    gsel = int(gnostic[rng.integers(0, gnostic.size)])
    ug = _sample_out(g, gsel, rng)
    new[ug] = s[gsel]
    return config.replace(new)


def _node_support(g: Graph, s: np.ndarray, v: int):
    """Distribution of node v's next state under one pull, as (state, prob)."""
    targets, weights = g.out_edges(v)
    probs: dict[int, float] = {}
    for u, w in zip(targets, weights):
        su = int(s[u])
        nxt = su if su != 0 else int(s[v])
        probs[nxt] = probs.get(nxt, 0.0) + float(w)
    return sorted(probs.items())


def _successor_items(g: Graph, s: np.ndarray, protocol: Protocol):
    """Exact one-round distribution as ``[(states_bytes, probability), ...]``.

    Probabilities of identical successor configurations are merged.  Raises
    TooLargeToEnumerate when the outcome count would exceed the module
    enumeration limit.
    """
    n = g.n
    acc: dict[bytes, float] = {}

    def add(arr: np.ndarray, p: float):
        key = arr.tobytes()
        acc[key] = acc.get(key, 0.0) + p

    if protocol is Protocol.SYNC_PULL:
        supports = [_node_support(g, s, v) for v in range(n)]
        total = 1.0
        for sup in supports:
            total *= len(sup)
            if total > ENUMERATION_LIMIT:
                raise TooLargeToEnumerate(
                    "synchronous support product exceeds the enumeration limit",
                    limit=ENUMERATION_LIMIT,
                )
        buf = np.empty(n, dtype=np.int8)
        for combo in itertools.product(*supports):
            p = 1.0
            for v in range(n):
                state, pv = combo[v]
                buf[v] = state
                p *= pv
            add(buf, p)
        return list(acc.items())

    if protocol in (Protocol.ASYNC_PULL, Protocol.ASYNC_PUSH):
        if g.edge_count > ENUMERATION_LIMIT:
            raise TooLargeToEnumerate(
                "edge count exceeds the enumeration limit", limit=ENUMERATION_LIMIT
            )
        base = 1.0 / n
        buf = s.copy()
        for v in range(n):
            sv = int(s[v])
            targets, weights = g.out_edges(v)
            for u, w in zip(targets, weights):
                su = int(s[u])
                if protocol is Protocol.ASYNC_PULL:
                    if su != 0 and su != sv:
                        buf[v] = su
                        add(buf, base * float(w))
                        buf[v] = sv
                    else:
                        add(s, base * float(w))
                else:
                    if sv != 0 and su != sv:
                        old = buf[u]
                        buf[u] = sv
                        add(buf, base * float(w))
                        buf[u] = old
                    else:
                        add(s, base * float(w))
        return list(acc.items())

    # async push-pull
    gnostic = np.flatnonzero(s != 0)
    if gnostic.size == 0:
        raise AllAgnostic("push-pull needs at least one gnostic node")
    agnostic = np.flatnonzero(s == 0)
    pull_moves: list[tuple[int, int, float]] = [(-1, 0, 1.0)]
    if agnostic.size:
        pull_moves = []
        pa = 1.0 / agnostic.size
        for a in agnostic:
            targets, weights = g.out_edges(int(a))
            for u, w in zip(targets, weights):
                pull_moves.append((int(a), int(s[u]), pa * float(w)))
    pg = 1.0 / gnostic.size
    push_moves: list[tuple[int, int, float]] = []
    for v in gnostic:
        targets, weights = g.out_edges(int(v))
        for u, w in zip(targets, weights):
            push_moves.append((int(u), int(s[v]), pg * float(w)))
    if len(pull_moves) * len(push_moves) > ENUMERATION_LIMIT:
        raise TooLargeToEnumerate(
            "push-pull move product exceeds the enumeration limit",
            limit=ENUMERATION_LIMIT,
        )
    buf = s.copy()
    for a, pulled, p1 in pull_moves:
        if a >= 0 and pulled != 0:
            buf[a] = pulled
        for u, pushed, p2 in push_moves:
            old = buf[u]
            buf[u] = pushed
            add(buf, p1 * p2)
            buf[u] = old
        if a >= 0:
            buf[a] = s[a]
    return list(acc.items())


def step_distribution(g: Graph, config: Configuration, protocol) -> dict:
    """Exact distribution of the next configuration after one round.

    Returns a dict mapping :class:`Configuration` to probability; the values
    sum to one up to float rounding.
    """
    protocol = Protocol.from_name(protocol)
    _check_graph_config(g, config)
    items = _successor_items(g, config.states, protocol)
    out = {}
    for key, p in items:
        arr = np.frombuffer(key, dtype=np.int8)
        out[Configuration(arr, k=config.k)] = p
    return out


def default_round_cap(n: int, protocol: Protocol) -> int:
    """Default stop-guard: ``10^4 n log n`` rounds, times ``n`` when async."""
    base = SYNC_CAP_FACTOR * n * math.log(max(n, 2))
    if protocol is not Protocol.SYNC_PULL:
        base *= n
    return int(math.ceil(base))


_STOP_MODES = {
    "all_gnostic": _kernels.STOP_ALL_GNOSTIC,
    "consensus": _kernels.STOP_CONSENSUS,
    "round_cap": _kernels.STOP_ROUND_CAP,
}

_ASYNC_PROTO_IDS = {
    Protocol.ASYNC_PULL: _kernels.PROTO_PULL,
    Protocol.ASYNC_PUSH: _kernels.PROTO_PUSH,
    Protocol.ASYNC_PUSH_PULL: _kernels.PROTO_PUSH_PULL,
}


class _TraceWriter:
    def __init__(self, path, k):
        self.file = open(path, "w", newline="")
        self.writer = csv.writer(self.file)
        self.writer.writerow(
            ["round", "agnostic"] + [f"colour_{c}" for c in range(1, k + 1)]
        )

    def record(self, round_idx, counts):
        self.writer.writerow([int(round_idx)] + [int(c) for c in counts])

    def close(self):
        self.file.close()


def run(
    g: Graph,
    s0: Configuration,
    protocol,
    stop: str = "consensus",
    rng: np.random.Generator | None = None,
    *,
    round_cap: int | None = None,
    trace_path=None,
    trace_every: int = 1,
    _force_kernel: str | None = None,
) -> RunOutcome:
    """Simulate one trajectory until a stop condition or the round cap.

    Parameters
    ----------
    stop : {"all_gnostic", "consensus", "round_cap"}
        ``all_gnostic`` halts once no agnostic node remains, ``consensus``
        once one colour holds every node, ``round_cap`` only at the cap.
        Monochromatic states halt every mode early since they cannot change.
    round_cap : int, optional
        Overrides :func:`default_round_cap`.  Every mode is capped.
    trace_path : path-like, optional
        Write a CSV of state counts every ``trace_every`` rounds.

    Raises
    ------
    CapWithoutProgress
        The cap was hit with agnostic nodes left and no gnostic-count
        change inside the final 10 percent of executed rounds.  The partial
        outcome is attached as ``exc.outcome``.
    """
    protocol = Protocol.from_name(protocol)
    _check_graph_config(g, s0)
    if stop not in _STOP_MODES:
        raise ValueError(f"unknown stop condition {stop!r}")
    if s0.gnostic_count == 0:
        raise AllAgnostic("dynamics need at least one gnostic node")
    if rng is None:
        rng = np.random.default_rng()
    cap = default_round_cap(g.n, protocol) if round_cap is None else int(round_cap)
    if cap < 0:
        raise ValueError("round_cap must be non-negative")
    if trace_every < 1:
        raise ValueError("trace_every must be at least 1")
    stop_mode = _STOP_MODES[stop]

    states = s0.states.copy()
    counts = s0.counts.copy()
    k = s0.k
    n = g.n

    t_a = 0 if s0.is_all_gnostic else None
    t_c = 0 if s0.is_monochromatic else None

    tracer = _TraceWriter(trace_path, k) if trace_path is not None else None
    if tracer:
        tracer.record(0, counts)

    def finish(rounds_done, capped):
        if tracer:
            tracer.close()
        final = Configuration(states, k=k)
        outcome = RunOutcome(
            t_agnostic=t_a,
            t_consensus=t_c,
            final_config=final,
            winner=final.winner,
            capped=capped,
            rounds_executed=rounds_done,
        )
        if capped and final.agnostic_count > 0:
            window = max(1, int(math.ceil(rounds_done * STALL_WINDOW)))
            if last_gain_abs <= rounds_done - window:
                err = CapWithoutProgress(
                    "round cap hit with agnostic nodes frozen",
                    rounds=rounds_done,
                    agnostic=final.agnostic_count,
                    last_gain=last_gain_abs,
                )
                err.outcome = outcome
                raise err
        return outcome

    done = (
        (stop == "all_gnostic" and t_a is not None)
        or t_c is not None
    )
    last_gain_abs = 0
    if done or cap == 0:
        return finish(0, capped=(cap == 0 and not done))

    tables = g.sample_tables()
    use_active = False
    ring_bits = None
    ring_scratch = None
    # The bit-packed ring kernel applies to sync two-colour dynamics once no
    # agnostic node remains; eligibility is decided up front, the handoff
    # happens when the generic kernel reports the all-gnostic point.
    ring_eligible = (
        protocol is Protocol.SYNC_PULL
        and k == 2
        and stop != "all_gnostic"
        and _force_kernel is None
        and g.is_uniform_ring()
    )
    if ring_eligible and int(counts[0]) == 0:
        ring_bits = _kernels.pack_ring_bits(states, RED)
        ring_scratch = np.empty_like(ring_bits)
    if protocol is Protocol.SYNC_PULL:
        kernel_stop = _kernels.STOP_ALL_GNOSTIC if ring_eligible else stop_mode
        kernel_kind = _force_kernel or (
            "active" if g.max_out_degree <= 8 else "sweep"
        )
        use_active = kernel_kind == "active" and ring_bits is None
        # Past this density the active list costs more upkeep per round
        # than the sweep spends on plain draws; a forced kernel never flips.
        dense_limit = n if _force_kernel else n // 4
        scratch = None
        if use_active:
            rev_indptr, rev_indices = g.reverse_csr()
            nb = _kernels.build_neighbour_counts(g.indptr, g.indices, states, k)
            active_pos = np.empty(n, dtype=np.int64)
            active_list = np.empty(n, dtype=np.int64)
            active_len = _kernels.init_active(
                g.indptr, states, nb, active_pos, active_list
            )
            change_node = np.empty(n, dtype=np.int64)
            change_state = np.empty(n, dtype=np.int8)
        elif ring_bits is None:
            scratch = np.empty_like(states)
    else:
        proto_id = _ASYNC_PROTO_IDS[protocol]
        if protocol is Protocol.ASYNC_PUSH_PULL:
            agn_pos = np.full(n, -1, dtype=np.int64)
            agn_list = np.empty(n, dtype=np.int64)
            gno_list = np.empty(n, dtype=np.int64)
            agn = np.flatnonzero(states == 0)
            gno = np.flatnonzero(states != 0)
            agn_list[: agn.size] = agn
            agn_pos[agn] = np.arange(agn.size)
            gno_list[: gno.size] = gno
            agn_len = int(agn.size)
            gno_len = int(gno.size)
        else:
            agn_pos = np.empty(0, dtype=np.int64)
            agn_list = np.empty(0, dtype=np.int64)
            gno_list = np.empty(0, dtype=np.int64)
            agn_len = 0
            gno_len = 0

    rounds_done = 0
    frozen = False
    while rounds_done < cap:
        budget = cap - rounds_done
        if tracer:
            budget = min(budget, int(trace_every))
        if ring_bits is not None:
            status, rounds, rt_c = _kernels.ring_sync(
                ring_bits, ring_scratch, n, budget, rng
            )
            if rt_c >= 0 and t_c is None:
                t_c = rounds_done + int(rt_c)
            rounds_done += int(rounds)
            red = int(_kernels.count_ring_bits(ring_bits, ring_bits.shape[0]))
            counts[0] = 0
            counts[1] = red
            counts[2] = n - red
            if tracer:
                tracer.record(rounds_done, counts)
            if status == _kernels.STATUS_STOPPED:
                _kernels.unpack_ring_bits(ring_bits, states, RED, BLUE)
                return finish(rounds_done, capped=False)
            continue
        if protocol is Protocol.SYNC_PULL:
            if use_active:
                status, rounds, rt_a, rt_c, gain, active_len = _kernels.sync_active(
                    *tables,
                    rev_indptr,
                    rev_indices,
                    states,
                    counts,
                    nb,
                    active_pos,
                    active_list,
                    active_len,
                    change_node,
                    change_state,
                    budget,
                    kernel_stop,
                    dense_limit,
                    rng,
                )
            else:
                status, rounds, rt_a, rt_c, gain = _kernels.sync_sweep(
                    *tables,
                    states,
                    scratch,
                    counts,
                    budget,
                    kernel_stop,
                    rng,
                )
        else:
            status, rounds, rt_a, rt_c, gain, agn_len, gno_len = _kernels.run_async(
                *tables,
                states,
                counts,
                agn_pos,
                agn_list,
                agn_len,
                gno_list,
                gno_len,
                proto_id,
                budget,
                stop_mode,
                rng,
            )
        if gain > 0:
            last_gain_abs = rounds_done + int(gain)
        if rt_a >= 0 and t_a is None:
            t_a = rounds_done + int(rt_a)
        if rt_c >= 0 and t_c is None:
            t_c = rounds_done + int(rt_c)
        rounds_done += int(rounds)
        if tracer:
            tracer.record(rounds_done, counts)
        if status == _kernels.STATUS_DENSE:
            use_active = False
            scratch = np.empty_like(states)
            continue
        if status == _kernels.STATUS_STOPPED:
            if ring_eligible and t_c is None and int(counts[0]) == 0:
                ring_bits = _kernels.pack_ring_bits(states, RED)
                ring_scratch = np.empty_like(ring_bits)
                continue
            return finish(rounds_done, capped=False)
        if status == _kernels.STATUS_FROZEN:
            # No node can ever change again; fast-forward to the cap.
            frozen = True
            break

    if frozen:
        rounds_done = cap
    if ring_bits is not None:
        _kernels.unpack_ring_bits(ring_bits, states, RED, BLUE)
    return finish(rounds_done, capped=True)
