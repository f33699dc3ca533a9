"""Exact consensus probabilities for small instances.

Three layers live here.  Closed forms: the stationary-mass identity for
fully gnostic configurations and the gnostic-fraction formula for complete
graphs under asynchronous pulls.  A brute-force oracle: breadth-first
enumeration of every configuration reachable from a start state, followed
by absorbing-chain linear solves for per-colour win probabilities and for
each node's probability of first turning the target colour.  And the
one-step conditional-expectation check used to validate the martingale
structure of the stationary-weighted value on reversible graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import splu

from .dynamics import RED, Configuration, Protocol, _successor_items
from .errors import (
    HasAgnosticNodes,
    InvalidSpec,
    NoGnosticNodes,
    NotStronglyConnected,
    SingularSystem,
    TooLargeToEnumerate,
)
from .generators import default_colour_names
from .graphs import Graph, _as_mu, stationary_distribution

# Upper bound on k^gnostic * (k+1)^agnostic before enumeration is refused.
MAX_ORACLE_STATES = 2_000_000
# Transient subsystems at or below this size use dense LU factorizations.
DENSE_SOLVE_LIMIT = 1500
# Row sums of the enumerated transition matrix must match 1 this tightly.
TRANSITION_ROW_TOL = 1e-9


def classical_win_probabilities(g: Graph, mu, config: Configuration) -> np.ndarray:
    """Per-colour win probabilities of a fully gnostic configuration.

    With no agnostic nodes the dynamics are the classical voter model, whose
    probability that colour ``c`` conquers the graph is the stationary mass
    of the nodes currently holding ``c``.

    Raises
    ------
    HasAgnosticNodes
        If any node is still agnostic.
    """
    vec = _as_mu(mu, g.n)
    if config.n != g.n:
        _dim_error(config.n, g.n)
    if not config.is_all_gnostic:
        raise HasAgnosticNodes(
            "classical win probabilities need a fully gnostic configuration",
            agnostic=config.agnostic_count,
        )
    out = np.zeros(config.k, dtype=np.float64)
    for colour in range(1, config.k + 1):
        out[colour - 1] = float(vec[config.colour_mask(colour)].sum())
    return out


def _dim_error(got, expected):
    from .errors import DimensionMismatch

    raise DimensionMismatch(f"configuration has {got} nodes, graph has {expected}")


@dataclass(frozen=True)
class GnosticCensus:
    """Node counts of a two-colour configuration."""

    red: int
    blue: int
    agnostic: int

    def __post_init__(self):
        if min(self.red, self.blue, self.agnostic) < 0:
            raise InvalidSpec("census counts must be non-negative")

    @property
    def n(self) -> int:
        return self.red + self.blue + self.agnostic

    @property
    def gamma(self) -> float:
        """Red share of the gnostic nodes."""
        gnostic = self.red + self.blue
        if gnostic == 0:
            raise NoGnosticNodes("census has no gnostic nodes")
        return self.red / gnostic

    @classmethod
    def from_configuration(cls, config: Configuration) -> "GnosticCensus":
        if config.k != 2:
            raise InvalidSpec("census is defined for two-colour configurations")
        counts = config.counts
        return cls(red=int(counts[1]), blue=int(counts[2]), agnostic=int(counts[0]))


def complete_graph_probability(census: GnosticCensus) -> float:
    """P(red wins) on a complete graph under asynchronous pulls.

    On the complete graph the win probability collapses to the initial red
    share of the gnostic nodes, independent of how many agnostic nodes the
    configuration carries.
    """
    return census.gamma


@dataclass(frozen=True)
class AbsorptionProfile:
    """Exact absorption quantities for one start state.

    ``q[v]`` is the probability that node ``v``'s first gnostic colour is
    the target (for already gnostic nodes this is an indicator on their
    current colour).  ``win_probability[c - 1]`` is the probability that
    colour ``c`` conquers the graph; ``nonconvergence_mass`` is whatever
    probability never reaches a monochromatic state.  ``martingale_value``
    is the stationary-weighted sum of ``q`` (NaN when the graph has no
    stationary distribution to weight by).
    """

    q: np.ndarray
    win_probability: np.ndarray
    nonconvergence_mass: float
    martingale_value: float
    target_colour: int
    protocol: Protocol
    states_enumerated: int

    def __post_init__(self):
        self.q.setflags(write=False)
        self.win_probability.setflags(write=False)

    def to_json_dict(self, colour_names=None) -> dict:
        k = self.win_probability.size
        names = colour_names or default_colour_names(k)
        return {
            "target_colour": int(self.target_colour),
            "protocol": self.protocol.value,
            "q": [float(x) for x in self.q],
            "win_probability": {
                names[c]: float(self.win_probability[c]) for c in range(k)
            },
            "nonconvergence_mass": float(self.nonconvergence_mass),
            "martingale_value": (
                None if math.isnan(self.martingale_value) else float(self.martingale_value)
            ),
            "states_enumerated": int(self.states_enumerated),
        }


class ChainOracle:
    """Absorbing-chain analysis of every state reachable from a root.

    Enumerates the reachable configuration space with breadth-first search,
    classifies its strongly connected components into transient states and
    closed classes (monochromatic states are absorbing singletons), and
    answers exact absorption questions through linear solves.
    """

    def __init__(self, g: Graph, root: Configuration, protocol):
        protocol = Protocol.from_name(protocol)
        if root.n != g.n:
            _dim_error(root.n, g.n)
        k = root.k
        bound = k ** root.gnostic_count * (k + 1) ** root.agnostic_count
        if bound > MAX_ORACLE_STATES:
            raise TooLargeToEnumerate(
                "reachable state bound exceeds the oracle limit",
                bound=bound,
                limit=MAX_ORACLE_STATES,
            )
        self.graph = g
        self.protocol = protocol
        self.k = k
        index: dict[bytes, int] = {root.states.tobytes(): 0}
        states = [np.array(root.states, dtype=np.int8)]
        rows: list[list[tuple[int, float]]] = []
        frontier = [0]
        while frontier:
            nxt = []
            for i in frontier:
                items = _successor_items(g, states[i], protocol)
                row = []
                for key, p in items:
                    j = index.get(key)
                    if j is None:
                        j = len(states)
                        index[key] = j
                        states.append(
                            np.frombuffer(key, dtype=np.int8).copy()
                        )
                        nxt.append(j)
                    row.append((j, p))
                rows.append(row)
            frontier = nxt
        m = len(states)
        self.m = m
        self.states = np.stack(states)
        self.index = index
        data = np.empty(sum(len(r) for r in rows), dtype=np.float64)
        cols = np.empty(data.size, dtype=np.int64)
        indptr = np.zeros(m + 1, dtype=np.int64)
        pos = 0
        for i, row in enumerate(rows):
            for j, p in row:
                cols[pos] = j
                data[pos] = p
                pos += 1
            indptr[i + 1] = pos
        self.P = sp.csr_matrix((data, cols, indptr), shape=(m, m))
        row_sums = np.asarray(self.P.sum(axis=1)).ravel()
        if np.max(np.abs(row_sums - 1.0)) > TRANSITION_ROW_TOL:
            raise SingularSystem(
                "enumerated transition rows do not sum to 1",
                worst=float(np.max(np.abs(row_sums - 1.0))),
            )

        n_comp, labels = csgraph.connected_components(
            self.P, directed=True, connection="strong"
        )
        coo = self.P.tocoo()
        open_label = np.zeros(n_comp, dtype=bool)
        cross = labels[coo.row] != labels[coo.col]
        open_label[labels[coo.row[cross]]] = True
        self.closed_state = ~open_label[labels]
        self.transient = ~self.closed_state

        counts_per_colour = np.stack(
            [(self.states == c).sum(axis=1) for c in range(1, k + 1)], axis=1
        )
        mono = np.zeros(m, dtype=np.int64)
        full = counts_per_colour == g.n
        rows_full, cols_full = np.nonzero(full)
        mono[rows_full] = cols_full + 1
        self.mono = mono

        self._lu_cache: dict[tuple, object] = {}
        self._win = None
        self._q_by_target: dict[int, np.ndarray] = {}

    # -- linear algebra helpers ------------------------------------------------

    def _solve_on(self, mask: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Solve (I - P[mask, mask]) x = b for the masked states."""
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            return np.zeros((0,) + b.shape[1:], dtype=np.float64)
        sub = self.P[idx][:, idx]
        key = (idx.tobytes(),)
        solver = self._lu_cache.get(key)
        try:
            if idx.size <= DENSE_SOLVE_LIMIT:
                if solver is None:
                    a = np.eye(idx.size) - sub.toarray()
                    solver = scipy.linalg.lu_factor(a)
                    self._lu_cache[key] = solver
                return scipy.linalg.lu_solve(solver, b)
            if solver is None:
                a = sp.identity(idx.size, format="csc") - sub.tocsc()
                solver = splu(a)
                self._lu_cache[key] = solver
            return solver.solve(b)
        except (np.linalg.LinAlgError, RuntimeError) as exc:
            raise SingularSystem(
                "absorbing-chain system is singular", size=int(idx.size)
            ) from exc

    def win_matrix(self) -> np.ndarray:
        """Per-state, per-colour absorption probabilities, shape (m, k)."""
        if self._win is not None:
            return self._win
        m, k = self.m, self.k
        win = np.zeros((m, k), dtype=np.float64)
        for c in range(1, k + 1):
            win[self.mono == c, c - 1] = 1.0
        t_idx = np.flatnonzero(self.transient)
        if t_idx.size:
            absorbed = np.zeros((m, k), dtype=np.float64)
            for c in range(1, k + 1):
                absorbed[self.mono == c, c - 1] = 1.0
            b = self.P[t_idx] @ absorbed
            # Mass flowing to other transient states is handled by the solve;
            # mass into closed non-monochromatic classes never absorbs.
            win[t_idx] = self._solve_on(self.transient, b)
        self._win = win
        return win

    def q_matrix(self, target: int) -> np.ndarray:
        """Per-state, per-node first-colour probabilities, shape (m, n)."""
        cached = self._q_by_target.get(target)
        if cached is not None:
            return cached
        if not 1 <= target <= self.k:
            raise InvalidSpec(f"target colour {target} outside 1..{self.k}")
        m, n = self.m, self.graph.n
        q = np.zeros((m, n), dtype=np.float64)
        for v in range(n):
            column = self.states[:, v]
            gnostic_here = column != 0
            q[gnostic_here & (column == target), v] = 1.0
            wv = (~gnostic_here) & self.transient
            idx = np.flatnonzero(wv)
            if idx.size == 0:
                continue
            hit = (column == target).astype(np.float64)
            b = self.P[idx] @ hit
            sub = self.P[idx][:, idx]
            try:
                if idx.size <= DENSE_SOLVE_LIMIT:
                    a = np.eye(idx.size) - sub.toarray()
                    x = scipy.linalg.solve(a, b)
                else:
                    a = sp.identity(idx.size, format="csc") - sub.tocsc()
                    x = splu(a).solve(b)
            except (np.linalg.LinAlgError, RuntimeError) as exc:
                raise SingularSystem(
                    "first-colour system is singular", node=v
                ) from exc
            q[idx, v] = x
            # Agnostic states inside closed classes keep q = 0: such a class
            # can never make v gnostic, or it could not return to this state.
        self._q_by_target[target] = q
        return q

    def value_vector(self, mu, target: int) -> np.ndarray:
        """Stationary-weighted node values per state, shape (m,)."""
        vec = _as_mu(mu, self.graph.n)
        return self.q_matrix(target) @ vec

    def state_index(self, config: Configuration) -> int:
        key = np.ascontiguousarray(config.states, dtype=np.int8).tobytes()
        idx = self.index.get(key)
        if idx is None:
            raise InvalidSpec("configuration was not reached from the root")
        return idx


def brute_force_absorption(
    g: Graph, s0: Configuration, protocol, target_colour: int = RED
) -> AbsorptionProfile:
    """Exact absorption profile of ``s0`` by exhaustive chain analysis."""
    oracle = ChainOracle(g, s0, protocol)
    win = oracle.win_matrix()[0]
    q = oracle.q_matrix(target_colour)[0]
    nonconv = float(min(1.0, max(0.0, 1.0 - win.sum())))
    try:
        mu = stationary_distribution(g).mu
        value = float(q @ mu)
    except NotStronglyConnected:
        value = math.nan
    return AbsorptionProfile(
        q=q.copy(),
        win_probability=win.copy(),
        nonconvergence_mass=nonconv,
        martingale_value=value,
        target_colour=target_colour,
        protocol=oracle.protocol,
        states_enumerated=oracle.m,
    )


def martingale_value(g: Graph, mu, profile: AbsorptionProfile) -> float:
    """Stationary-weighted sum of the profile's first-colour probabilities."""
    vec = _as_mu(mu, g.n)
    return float(profile.q @ vec)


@dataclass(frozen=True)
class MartingaleCheck:
    """One-step conditional expectation against the current value.

    ``gap`` is ``|expected_next - value|``; reversible graphs drive it to
    zero (up to solver rounding), non-reversible ones generally do not.
    """

    value: float
    expected_next: float
    gap: float


def one_step_martingale_check(
    g: Graph, mu, config: Configuration, protocol, target_colour: int = RED
) -> MartingaleCheck:
    """Compare E[value after one round | config] with value(config)."""
    oracle = ChainOracle(g, config, protocol)
    values = oracle.value_vector(mu, target_colour)
    x_now = float(values[0])
    expected = float((oracle.P[0] @ values)[0])
    return MartingaleCheck(
        value=x_now, expected_next=expected, gap=abs(expected - x_now)
    )


def immediate_resolution_q(g: Graph, config: Configuration, target_colour: int) -> np.ndarray:
    """First-colour probabilities when no edge joins two agnostic nodes.

    Under synchronous pulls every agnostic node then resolves in the very
    first round, so its probability of turning the target colour is the
    weight it places on target-coloured out-neighbours divided by the weight
    on gnostic out-neighbours (the denominator equals one here, since no
    out-weight can rest on an agnostic neighbour).

    Raises
    ------
    InvalidSpec
        If some agnostic node has an agnostic out-neighbour (including a
        self-loop on an agnostic node).
    """
    if config.n != g.n:
        _dim_error(config.n, g.n)
    s = config.states
    q = np.zeros(g.n, dtype=np.float64)
    for v in range(g.n):
        targets, weights = g.out_edges(v)
        if s[v] != 0:
            q[v] = 1.0 if int(s[v]) == target_colour else 0.0
            continue
        neighbour_states = s[targets]
        if np.any(neighbour_states == 0):
            raise InvalidSpec(
                "an agnostic node has an agnostic out-neighbour",
                node=v,
            )
        gnostic_weight = float(weights.sum())
        q[v] = float(weights[neighbour_states == target_colour].sum()) / gnostic_weight
    return q
