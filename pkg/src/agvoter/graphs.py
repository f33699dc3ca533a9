"""Weighted directed graphs with row-stochastic out-weights.

A :class:`Graph` stores, for every node ``v``, the weights ``H(v, u)`` of its
out-edges.  Each row must sum to one, so ``H`` is simultaneously the adjacency
structure and the transition matrix of the random walk that the dynamics
sample from.  The module also provides the stationary distribution of that
walk, a reversibility (detailed balance) check, and an edge-boundary
concentration check used for dense random graphs.

Parameters
----------
Rows whose sums deviate from one by at most ``RENORMALIZE_TOL`` are silently
renormalized at construction; larger deviations raise :class:`InvalidGraph`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import (
    DimensionMismatch,
    EmptyGraph,
    InvalidGraph,
    NoConvergence,
    NotStronglyConnected,
)

# Row sums may drift this far from 1 before construction refuses the data.
RENORMALIZE_TOL = 1e-6
# Tolerance against which the row-sum invariant is asserted after the fact.
ROW_SUM_TOL = 1e-9
# Largest n for which the stationary distribution is solved directly.
DIRECT_SOLVE_MAX_N = 2000
# Power iteration convergence and budget.
POWER_ITER_TOL = 1e-12
POWER_ITER_MAX_SWEEPS = 10**6
# Residual bound the returned stationary vector must satisfy.
RESIDUAL_TOL = 1e-10
# Detailed-balance gaps at or below this count as reversible.
REVERSIBILITY_TOL = 1e-10
# Rows with more out-edges than this and non-uniform weights get alias tables.
ALIAS_DEGREE_THRESHOLD = 8


class Graph:
    """Immutable weighted digraph in CSR form with row-stochastic weights.

    Parameters
    ----------
    indptr : array of int64, shape (n + 1,)
        CSR row pointers.
    indices : array of int64, shape (E,)
        Out-edge targets, sorted within each row.
    weights : array of float64, shape (E,)
        Positive out-edge weights; each row sums to one after normalization.
    node_labels : array-like, optional
        External identifiers, one per node (for loaded corpora).
    """

    __slots__ = (
        "n",
        "indptr",
        "indices",
        "weights",
        "row_cum",
        "node_labels",
        "_row_uniform",
        "_alias_prob",
        "_alias_idx",
        "_sparse",
        "_reverse",
        "_gcum",
        "_ring",
    )

    def __init__(self, indptr, indices, weights, node_labels=None):
        indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        indices = np.ascontiguousarray(indices, dtype=np.int64)
        weights = np.ascontiguousarray(weights, dtype=np.float64)
        if indptr.ndim != 1 or indptr.size == 0:
            raise InvalidGraph("indptr must be a 1-d array of length n + 1")
        n = int(indptr.size - 1)
        if indptr[0] != 0 or indices.shape != weights.shape or indices.ndim != 1:
            raise InvalidGraph("malformed CSR arrays")
        if int(indptr[-1]) != indices.size or np.any(np.diff(indptr) < 0):
            raise InvalidGraph("malformed CSR row pointers")
        self.n = n
        if n > 0:
            degrees = np.diff(indptr)
            if np.any(degrees == 0):
                v = int(np.flatnonzero(degrees == 0)[0])
                raise InvalidGraph(
                    f"node {v} has no out-edges; rows must be stochastic", node=v
                )
            if indices.size:
                if indices.min() < 0 or indices.max() >= n:
                    raise InvalidGraph("edge target out of range")
                if np.any(weights <= 0.0):
                    raise InvalidGraph("edge weights must be strictly positive")
            # Canonical order: sort each row by target, then reject duplicates.
            order = np.lexsort((indices, np.repeat(np.arange(n), degrees)))
            indices = indices[order]
            weights = weights[order]
            rows = np.repeat(np.arange(n), degrees)
            dup = (np.diff(rows) == 0) & (np.diff(indices) == 0)
            if np.any(dup):
                e = int(np.flatnonzero(dup)[0])
                raise InvalidGraph(
                    "duplicate edge", source=int(rows[e]), target=int(indices[e])
                )
            sums = np.add.reduceat(weights, indptr[:-1])
            if np.any(np.abs(sums - 1.0) > RENORMALIZE_TOL):
                v = int(np.flatnonzero(np.abs(sums - 1.0) > RENORMALIZE_TOL)[0])
                raise InvalidGraph(
                    f"out-weights of node {v} sum to {sums[v]!r}, not 1",
                    node=v,
                    row_sum=float(sums[v]),
                )
            weights = weights / np.repeat(sums, degrees)
            row_cum = np.cumsum(weights)
            row_cum = row_cum - np.repeat(
                np.concatenate(([0.0], row_cum[indptr[1:-1] - 1])), degrees
            )
            # Pin each row's last cumulative weight to exactly 1 so that
            # inverse-CDF draws with r < 1 always land inside the row.
            row_cum[indptr[1:] - 1] = 1.0
            inv_deg = 1.0 / degrees
            self._row_uniform = np.zeros(n, dtype=np.bool_)
            np.logical_and.reduceat(
                np.abs(weights - np.repeat(inv_deg, degrees)) <= 1e-12,
                indptr[:-1],
                out=self._row_uniform,
            )
        else:
            row_cum = np.empty(0, dtype=np.float64)
            self._row_uniform = np.zeros(0, dtype=np.bool_)
        self.indptr = indptr
        self.indices = indices
        self.weights = weights
        self.row_cum = row_cum
        if node_labels is not None:
            node_labels = np.asarray(node_labels)
            if node_labels.shape != (n,):
                raise InvalidGraph("node_labels must have one entry per node")
        self.node_labels = node_labels
        self._alias_prob, self._alias_idx = self._build_alias_tables()
        for arr in (self.indptr, self.indices, self.weights, self.row_cum,
                    self._row_uniform, self._alias_prob, self._alias_idx):
            arr.setflags(write=False)
        if self.node_labels is not None:
            self.node_labels.setflags(write=False)
        self._sparse = None
        self._reverse = None
        self._gcum = None
        self._ring = None

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_edges(cls, n, edges, node_labels=None):
        """Build a graph from an iterable of ``(source, target, weight)``.

        Parameters
        ----------
        n : int
            Number of nodes; sources and targets must lie in ``range(n)``.
        edges : iterable of (int, int, float)
            Directed weighted edges; duplicates are rejected.
        """
        edges = list(edges)
        src = np.fromiter((e[0] for e in edges), dtype=np.int64, count=len(edges))
        dst = np.fromiter((e[1] for e in edges), dtype=np.int64, count=len(edges))
        w = np.fromiter((e[2] for e in edges), dtype=np.float64, count=len(edges))
        if len(edges) and (src.min() < 0 or src.max() >= n):
            raise InvalidGraph("edge source out of range")
        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(indptr, dst, w, node_labels=node_labels)

    @classmethod
    def from_matrix(cls, matrix, node_labels=None):
        """Build a graph from a dense row-stochastic matrix (zeros = no edge)."""
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidGraph("matrix must be square")
        n = matrix.shape[0]
        src, dst = np.nonzero(matrix)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(indptr, dst, matrix[src, dst], node_labels=node_labels)

    @classmethod
    def undirected_uniform(cls, n, pairs, node_labels=None):
        """Build the uniform-pull graph of an undirected simple graph.

        Every pair ``{u, v}`` becomes two directed edges and each row gets
        uniform weights ``1 / degree``.  Self-loops (``u == v``) become a
        single directed loop and count once towards the degree.
        """
        pairs = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        loops = pairs[:, 0] == pairs[:, 1]
        plain = pairs[~loops]
        src = np.concatenate([plain[:, 0], plain[:, 1], pairs[loops, 0]])
        dst = np.concatenate([plain[:, 1], plain[:, 0], pairs[loops, 0]])
        deg = np.bincount(src, minlength=n)
        if np.any(deg == 0):
            v = int(np.flatnonzero(deg == 0)[0])
            raise InvalidGraph(f"node {v} has no incident edges", node=v)
        w = 1.0 / deg[src]
        order = np.lexsort((dst, src))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(indptr, dst[order], w[order], node_labels=node_labels)

    def _build_alias_tables(self):
        # Alias sampling pays off only for heavy non-uniform rows; rows that
        # are uniform sample in O(1) anyway and short rows scan the CDF.
        need = ~self._row_uniform
        if self.n == 0 or not np.any(need & (np.diff(self.indptr) > ALIAS_DEGREE_THRESHOLD)):
            return (np.empty(0, dtype=np.float64), np.empty(0, dtype=np.int64))
        prob = np.zeros(self.indices.size, dtype=np.float64)
        alias = np.zeros(self.indices.size, dtype=np.int64)
        for v in range(self.n):
            lo, hi = int(self.indptr[v]), int(self.indptr[v + 1])
            deg = hi - lo
            if deg <= ALIAS_DEGREE_THRESHOLD or self._row_uniform[v]:
                continue
            scaled = self.weights[lo:hi] * deg
            p = prob[lo:hi]
            a = alias[lo:hi]
            p[:] = scaled
            a[:] = np.arange(lo, hi)
            small = [i for i in range(deg) if scaled[i] < 1.0]
            large = [i for i in range(deg) if scaled[i] >= 1.0]
            work = scaled.copy()
            while small and large:
                s = small.pop()
                g = large.pop()
                p[s] = work[s]
                a[s] = lo + g
                work[g] = (work[g] + work[s]) - 1.0
                if work[g] < 1.0:
                    small.append(g)
                else:
                    large.append(g)
            for i in small + large:
                p[i] = 1.0
                a[i] = lo + i
        return prob, alias

    # -- basic accessors -------------------------------------------------------

    @property
    def edge_count(self) -> int:
        return int(self.indices.size)

    @property
    def max_out_degree(self) -> int:
        if self.n == 0:
            return 0
        return int(np.max(np.diff(self.indptr)))

    def out_degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def out_edges(self, v: int):
        """Return ``(targets, weights)`` views for node ``v``."""
        lo, hi = self.indptr[v], self.indptr[v + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def transition_matrix(self) -> sp.csr_matrix:
        """The row-stochastic weight matrix as a scipy CSR matrix (cached)."""
        if self._sparse is None:
            self._sparse = sp.csr_matrix(
                (self.weights, self.indices, self.indptr), shape=(self.n, self.n)
            )
        return self._sparse

    def reverse_csr(self):
        """In-edge structure ``(indptr, indices)`` of the transposed graph."""
        if self._reverse is None:
            t = self.transition_matrix().T.tocsr()
            t.sort_indices()
            self._reverse = (
                t.indptr.astype(np.int64),
                t.indices.astype(np.int64),
            )
        return self._reverse

    def sample_tables(self):
        """Arrays consumed by the jitted samplers (shared, read-only)."""
        return (
            self.indptr,
            self.indices,
            self.row_cum,
            self._row_uniform,
            self._alias_prob,
            self._alias_idx,
        )

    def global_cumulative(self):
        """Per-edge cumulative weights offset by the row index.

        Entry ``e`` of the result equals ``row(e) + cum_weight(e)``, which is
        strictly increasing, so one vectorized ``searchsorted`` draws one
        neighbour for every node at once.
        """
        if self._gcum is None:
            rows = np.repeat(np.arange(self.n, dtype=np.float64), np.diff(self.indptr))
            self._gcum = rows + self.row_cum
            self._gcum.setflags(write=False)
        return self._gcum

    def is_uniform_ring(self):
        """True when node ``v``'s out-neighbours are exactly ``v - 1`` and
        ``v + 1`` modulo ``n`` with equal weight.

        This is the canonical cycle layout; the simulator uses it to enable a
        bit-packed round kernel for the two-colour all-gnostic phase.
        """
        if self._ring is None:
            ok = (
                self.n >= 3
                and self.edge_count == 2 * self.n
                and bool(np.all(self._row_uniform))
            )
            if ok:
                v = np.arange(self.n)
                lo = np.minimum((v - 1) % self.n, (v + 1) % self.n)
                hi = np.maximum((v - 1) % self.n, (v + 1) % self.n)
                starts = self.indptr[:-1]
                ok = bool(
                    np.all(np.diff(self.indptr) == 2)
                    and np.all(self.indices[starts] == lo)
                    and np.all(self.indices[starts + 1] == hi)
                )
            self._ring = ok
        return self._ring

    def undirected_pairs(self):
        """Unordered node pairs ``u < v`` joined by at least one edge."""
        coo = self.transition_matrix().tocoo()
        mask = coo.row != coo.col
        lo = np.minimum(coo.row[mask], coo.col[mask]).astype(np.int64)
        hi = np.maximum(coo.row[mask], coo.col[mask]).astype(np.int64)
        keys = np.unique(lo * self.n + hi)
        return np.stack([keys // self.n, keys % self.n], axis=1)

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.edge_count})"

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.n, self.indices.tobytes(), self.weights.tobytes()))


@dataclass(frozen=True)
class StationaryDistribution:
    """Stationary row vector of the out-weight matrix.

    Attributes
    ----------
    mu : ndarray, shape (n,)
        Non-negative entries summing to one with ``mu @ H == mu``.
    residual : float
        Max-norm of ``mu @ H - mu`` actually achieved.
    method : str
        ``"direct-solve"`` or ``"power-iteration"``.
    """

    mu: np.ndarray
    residual: float
    method: str

    def __post_init__(self):
        self.mu.setflags(write=False)

    def __len__(self):
        return self.mu.size


def _as_mu(mu, n: int) -> np.ndarray:
    vec = mu.mu if isinstance(mu, StationaryDistribution) else np.asarray(mu, dtype=np.float64)
    if vec.shape != (n,):
        raise DimensionMismatch(
            f"stationary vector has length {vec.size}, graph has {n} nodes"
        )
    return vec


def is_strongly_connected(g: Graph) -> bool:
    """True when every node reaches every other along directed edges."""
    if g.n <= 1:
        return True
    m = g.transition_matrix()
    fwd = csgraph.breadth_first_order(m, 0, directed=True, return_predecessors=False)
    if fwd.size != g.n:
        return False
    bwd = csgraph.breadth_first_order(
        m.T.tocsr(), 0, directed=True, return_predecessors=False
    )
    return bool(bwd.size == g.n)


def stationary_distribution(
    g: Graph,
    *,
    tol: float = POWER_ITER_TOL,
    max_sweeps: int = POWER_ITER_MAX_SWEEPS,
) -> StationaryDistribution:
    """Solve ``mu @ H = mu`` with ``sum(mu) = 1``.

    Small graphs (``n <= 2000``) use a dense linear solve; larger graphs run
    a lazy power iteration on ``(I + H) / 2``, which has the same stationary
    vector but converges for periodic chains too.

    Raises
    ------
    NotStronglyConnected
        If the stationary vector would not be unique and positive.
    NoConvergence
        If power iteration does not meet ``tol`` within ``max_sweeps``.
    """
    if g.n == 0:
        raise EmptyGraph("stationary distribution needs at least one node")
    if not is_strongly_connected(g):
        raise NotStronglyConnected("graph is not strongly connected")
    h = g.transition_matrix()
    if g.n <= DIRECT_SOLVE_MAX_N:
        a = h.toarray().T - np.eye(g.n)
        a[-1, :] = 1.0
        b = np.zeros(g.n)
        b[-1] = 1.0
        mu = np.linalg.solve(a, b)
        method = "direct-solve"
    else:
        ht = h.T.tocsr()
        mu = np.full(g.n, 1.0 / g.n)
        for _ in range(max_sweeps):
            hmu = ht @ mu
            if np.max(np.abs(hmu - mu)) <= tol:
                break
            mu = 0.5 * (mu + hmu)
            mu /= mu.sum()
        else:
            raise NoConvergence(
                "power iteration did not converge", sweeps=max_sweeps, tol=tol
            )
        method = "power-iteration"
    mu = mu / mu.sum()
    residual = float(np.max(np.abs(h.T @ mu - mu)))
    if residual > RESIDUAL_TOL or np.min(mu) <= 0.0:
        raise NoConvergence(
            "stationary solve failed its residual or positivity check",
            residual=residual,
            min_entry=float(np.min(mu)),
        )
    return StationaryDistribution(mu=mu, residual=residual, method=method)


@dataclass(frozen=True)
class ReversibilityReport:
    """Outcome of a detailed-balance check.

    ``worst_violation`` is ``(v, w, gap)`` for the unordered pair with the
    largest ``|mu(v) H(v, w) - mu(w) H(w, v)|``; ties pick the
    lexicographically smallest pair.  It is reported even when reversible.
    """

    reversible: bool
    worst_violation: tuple[int, int, float]
    tolerance: float


def check_reversibility(
    g: Graph, mu, *, tol: float = REVERSIBILITY_TOL
) -> ReversibilityReport:
    """Check ``mu(v) H(v, w) == mu(w) H(w, v)`` for all pairs."""
    vec = _as_mu(mu, g.n)
    h = g.transition_matrix()
    flow = sp.diags(vec) @ h
    gap = (flow - flow.T).tocoo()
    mask = gap.row < gap.col
    rows, cols, vals = gap.row[mask], gap.col[mask], np.abs(gap.data[mask])
    if vals.size == 0:
        worst = (0, 0, 0.0)
    else:
        best = np.max(vals)
        tied = np.flatnonzero(vals == best)
        pick = tied[np.lexsort((cols[tied], rows[tied]))[0]]
        worst = (int(rows[pick]), int(cols[pick]), float(vals[pick]))
    return ReversibilityReport(
        reversible=bool(worst[2] <= tol), worst_violation=worst, tolerance=tol
    )


@dataclass(frozen=True)
class BoundaryCheck:
    """Edge-boundary size of a node subset against its dense-graph expectation.

    ``within_bound`` states whether the count deviates from
    ``(n - |S|) |S| p`` by at most a factor ``sqrt(8 / alpha)`` of it, where
    ``alpha = p n / log(n)``.
    """

    subset_size: int
    boundary_edges: int
    expected: float
    alpha: float
    within_bound: bool


def edge_boundary(g: Graph, subset, p: float) -> BoundaryCheck:
    """Count undirected edges leaving ``subset`` and compare to ``(n-s)sp``.

    Parameters
    ----------
    subset : iterable of int
        Node ids forming the subset ``S``.
    p : float
        Edge density parameter in ``(0, 1]`` used for the expectation.
    """
    if g.n < 2:
        raise EmptyGraph("edge boundary needs at least two nodes")
    if not (0.0 < p <= 1.0):
        raise ValueError("p must lie in (0, 1]")
    members = np.asarray(sorted(set(int(v) for v in subset)), dtype=np.int64)
    if members.size and (members[0] < 0 or members[-1] >= g.n):
        raise DimensionMismatch("subset contains node ids outside the graph")
    in_s = np.zeros(g.n, dtype=bool)
    in_s[members] = True
    pairs = g.undirected_pairs()
    if pairs.size:
        crossing = int(np.count_nonzero(in_s[pairs[:, 0]] ^ in_s[pairs[:, 1]]))
    else:
        crossing = 0
    s = int(members.size)
    expected = float((g.n - s) * s * p)
    alpha = p * g.n / math.log(g.n)
    slack = math.sqrt(8.0 / alpha) * expected
    return BoundaryCheck(
        subset_size=s,
        boundary_edges=crossing,
        expected=expected,
        alpha=alpha,
        within_bound=bool(abs(crossing - expected) <= slack),
    )
