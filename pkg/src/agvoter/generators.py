"""Graph families, edge-list corpora, subgraph sampling, and initial states.

Random families are pure functions of their spec: the same spec (including
its seed) always yields the same edge set and the same serialized bytes.
Random families retry generation until the undirected view is connected.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import Configuration
from .errors import (
    AllAgnostic,
    DisconnectedAfterRetries,
    InvalidSpec,
    IsolatedNode,
    ParseError,
    StrongConnectivityWarning,
    TargetTooLarge,
)
from .graphs import Graph, is_strongly_connected

FAMILIES = ("clique", "cycle", "erdos_renyi", "sbm")
MAX_CONNECTIVITY_RETRIES = 100
# Dense pair sampling is quadratic in n; random families are desk-scale.
MAX_RANDOM_FAMILY_N = 20000

SBM_DEFAULT_INTRA_P = 1.0
SBM_DEFAULT_INTER_P = 0.05


@dataclass(frozen=True)
class GeneratorSpec:
    """Description of a graph to generate.

    Parameters
    ----------
    family : str
        One of ``clique``, ``cycle``, ``erdos_renyi``, ``sbm``.
    n : int
        Node count.  Cycles must have odd ``n`` so that synchronous pulls
        cannot lock into a two-colouring oscillation.
    p : float, optional
        Edge probability (Erdos-Renyi only).
    intra_p, inter_p : float
        Within- and between-community edge probabilities (SBM only).
    community_size : int, optional
        Community size (SBM only); must divide ``n``.
    seed : int
        Seed for the random families; ignored by deterministic ones.
    """

    family: str
    n: int
    p: float | None = None
    intra_p: float = SBM_DEFAULT_INTRA_P
    inter_p: float = SBM_DEFAULT_INTER_P
    community_size: int | None = None
    seed: int = 0

    def validate(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(
                f"unknown family {self.family!r}", family=self.family
            )
        n = self.n
        if self.family == "clique":
            if n < 2:
                raise InvalidSpec("clique needs n >= 2", n=n)
        elif self.family == "cycle":
            if n < 3 or n % 2 == 0:
                raise InvalidSpec(
                    "cycle needs odd n >= 3 (even cycles oscillate under "
                    "synchronous pulls)",
                    n=n,
                )
        elif self.family == "erdos_renyi":
            if n < 2:
                raise InvalidSpec("erdos_renyi needs n >= 2", n=n)
            if n > MAX_RANDOM_FAMILY_N:
                raise InvalidSpec(
                    f"erdos_renyi sampling is quadratic; n <= {MAX_RANDOM_FAMILY_N}",
                    n=n,
                )
            if self.p is None or not (0.0 < self.p <= 1.0):
                raise InvalidSpec("erdos_renyi needs p in (0, 1]", p=self.p)
        elif self.family == "sbm":
            if n < 2:
                raise InvalidSpec("sbm needs n >= 2", n=n)
            if n > MAX_RANDOM_FAMILY_N:
                raise InvalidSpec(
                    f"sbm sampling is quadratic; n <= {MAX_RANDOM_FAMILY_N}", n=n
                )
            c = self.community_size
            if c is None or c < 1 or n % c != 0:
                raise InvalidSpec(
                    "sbm needs a community_size dividing n",
                    n=n,
                    community_size=c,
                )
            for name, value in (("intra_p", self.intra_p), ("inter_p", self.inter_p)):
                if not (0.0 <= value <= 1.0):
                    raise InvalidSpec(f"{name} must lie in [0, 1]", **{name: value})


def _connected_pairs(n: int, pairs: np.ndarray) -> bool:
    if pairs.shape[0] < n - 1:
        return False
    deg = np.bincount(pairs.ravel(), minlength=n)
    if np.any(deg == 0):
        return False
    return is_strongly_connected(Graph.undirected_uniform(n, pairs))


def _sample_pair_graph(spec: GeneratorSpec, pair_prob) -> Graph:
    """Draw undirected pairs with given upper-triangle probabilities until
    the result is connected."""
    rng = np.random.default_rng(spec.seed)
    iu, ju = np.triu_indices(spec.n, k=1)
    probs = pair_prob(iu, ju)
    for _ in range(MAX_CONNECTIVITY_RETRIES):
        mask = rng.random(iu.size) < probs
        pairs = np.stack([iu[mask], ju[mask]], axis=1)
        if _connected_pairs(spec.n, pairs):
            return Graph.undirected_uniform(spec.n, pairs)
    raise DisconnectedAfterRetries(
        "random graph stayed disconnected",
        retries=MAX_CONNECTIVITY_RETRIES,
        family=spec.family,
        n=spec.n,
    )


def generate(spec: GeneratorSpec) -> Graph:
    """Materialize the graph described by ``spec`` with uniform out-weights."""
    spec.validate()
    n = spec.n
    if spec.family == "clique":
        iu, ju = np.triu_indices(n, k=1)
        return Graph.undirected_uniform(n, np.stack([iu, ju], axis=1))
    if spec.family == "cycle":
        pairs = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
        return Graph.undirected_uniform(n, pairs)
    if spec.family == "erdos_renyi":
        density = spec.p * n / math.log(n)
        if density <= 1.0:
            warnings.warn(
                f"erdos_renyi with p*n/log(n) = {density:.3f} <= 1 is too "
                "sparse for the dense-regime guarantees",
                UserWarning,
                stacklevel=2,
            )
        return _sample_pair_graph(spec, lambda i, j: spec.p)
    # sbm
    comm_of = np.arange(n) // spec.community_size

    def block_prob(i, j):
        return np.where(comm_of[i] == comm_of[j], spec.intra_p, spec.inter_p)

    return _sample_pair_graph(spec, block_prob)


def path_graph(n: int) -> Graph:
    """Undirected path 0 - 1 - ... - n-1 with uniform out-weights."""
    if n < 2:
        raise InvalidSpec("path needs n >= 2", n=n)
    pairs = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
    return Graph.undirected_uniform(n, pairs)


# -- edge-list corpora --------------------------------------------------------


def load_edge_list(path) -> Graph:
    """Load a whitespace-separated edge list.

    Lines starting with ``#`` and blank lines are skipped.  Two columns per
    line mean an undirected unweighted graph: edges are symmetrized, rows get
    uniform weights, repeated pairs collapse.  Three columns mean a directed
    weighted graph ``source target weight`` with weights in ``(0, 1]``; rows
    are renormalized to sum to one.  Node ids are arbitrary non-negative
    integers and are remapped to ``0..n-1`` in sorted order, kept in
    ``node_labels``.

    Raises
    ------
    ParseError
        Malformed line (wrong column count, non-integer id, bad weight).
    IsolatedNode
        A node of a weighted list has in-edges but no out-edges.

    Warns with :class:`StrongConnectivityWarning` when the loaded directed
    graph is not strongly connected.
    """
    rows = []
    mode = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ParseError(
                    f"expected 2 or 3 columns, found {len(parts)}", line=lineno
                )
            if mode is None:
                mode = len(parts)
            elif len(parts) != mode:
                raise ParseError(
                    "mixed column counts in edge list", line=lineno
                )
            try:
                u = int(parts[0])
                v = int(parts[1])
            except ValueError:
                raise ParseError("node ids must be integers", line=lineno) from None
            if u < 0 or v < 0:
                raise ParseError("node ids must be non-negative", line=lineno)
            if mode == 2:
                rows.append((u, v))
            else:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise ParseError("weight must be a decimal", line=lineno) from None
                if not (0.0 < w <= 1.0) or not math.isfinite(w):
                    raise ParseError(
                        f"weight {parts[2]} outside (0, 1]", line=lineno
                    )
                rows.append((u, v, w))
    if not rows:
        raise ParseError("edge list contains no edges", line=None)

    ids = sorted({r[0] for r in rows} | {r[1] for r in rows})
    remap = {ext: i for i, ext in enumerate(ids)}
    n = len(ids)
    labels = np.asarray(ids, dtype=np.int64)
    if mode == 2:
        pairs = {(min(remap[u], remap[v]), max(remap[u], remap[v])) for u, v in rows}
        g = Graph.undirected_uniform(n, sorted(pairs), node_labels=labels)
    else:
        out_deg = np.zeros(n, dtype=np.int64)
        for u, v, w in rows:
            out_deg[remap[u]] += 1
        if np.any(out_deg == 0):
            missing = int(np.flatnonzero(out_deg == 0)[0])
            raise IsolatedNode(
                f"node {ids[missing]} has no out-edges", node=int(ids[missing])
            )
        # Rows are renormalized: scale each row by its weight sum.
        sums = np.zeros(n, dtype=np.float64)
        for u, v, w in rows:
            sums[remap[u]] += w
        edges = [(remap[u], remap[v], w / sums[remap[u]]) for u, v, w in rows]
        g = Graph.from_edges(n, edges, node_labels=labels)
    if not is_strongly_connected(g):
        warnings.warn(
            "loaded graph is not strongly connected",
            StrongConnectivityWarning,
            stacklevel=2,
        )
    return g


def sample_connected_subgraph(g: Graph, target_n: int, seed: int = 0) -> Graph:
    """Induce a connected subgraph on the first ``target_n`` nodes discovered
    by a randomized depth-first search.

    The DFS follows out-edges in shuffled order from a uniform start node.
    Selected nodes are relabelled by discovery order; the induced adjacency
    is symmetrized and re-weighted uniformly, so the result suits pull
    dynamics even when the source was directed.  ``node_labels`` track the
    original identities (composed with the source's own labels if any).
    """
    if target_n < 1 or target_n > g.n:
        raise TargetTooLarge(
            f"cannot sample {target_n} nodes from a graph with {g.n}",
            target=target_n,
            available=g.n,
        )
    rng = np.random.default_rng(seed)
    start = int(rng.integers(0, g.n))
    discovered = {start: 0}
    order = [start]
    stack = [start]
    while stack and len(order) < target_n:
        v = stack.pop()
        targets, _ = g.out_edges(v)
        targets = targets.copy()
        rng.shuffle(targets)
        for u in targets:
            u = int(u)
            if u not in discovered:
                discovered[u] = len(order)
                order.append(u)
                stack.append(u)
                if len(order) == target_n:
                    break
    if len(order) < target_n:
        raise TargetTooLarge(
            "depth-first search exhausted a component smaller than target",
            target=target_n,
            reached=len(order),
        )
    selected = set(order)
    pairs = set()
    for v in order:
        targets, _ = g.out_edges(v)
        for u in targets:
            u = int(u)
            if u in selected:
                a, b = discovered[v], discovered[u]
                pairs.add((min(a, b), max(a, b)))
    if g.node_labels is not None:
        labels = np.asarray([g.node_labels[v] for v in order])
    else:
        labels = np.asarray(order, dtype=np.int64)
    return Graph.undirected_uniform(target_n, sorted(pairs), node_labels=labels)


# -- initial configurations ---------------------------------------------------


@dataclass(frozen=True)
class InitialConfigSpec:
    """Description of an initial state assignment.

    ``kind`` selects the layout:

    - ``fractions``: ``floor(fraction * n)`` nodes per colour placed by a
      seeded uniform permutation, the rest agnostic.
    - ``arcs``: the same counts laid out as contiguous blocks starting at
      node 0, colour by colour (for ring topologies).
    - ``explicit``: ``states`` used verbatim.
    """

    kind: str
    fractions: tuple = ()
    states: tuple = ()
    k: int | None = None
    seed: int = 0

    def validate(self):
        if self.kind not in ("fractions", "arcs", "explicit"):
            raise InvalidSpec(f"unknown initial kind {self.kind!r}", kind=self.kind)
        if self.kind in ("fractions", "arcs"):
            if not self.fractions:
                raise InvalidSpec("fractions must list one share per colour")
            if any(f < 0 for f in self.fractions):
                raise InvalidSpec("fractions must be non-negative")
            if sum(self.fractions) > 1.0 + 1e-12:
                raise InvalidSpec(
                    "fractions sum exceeds 1", total=float(sum(self.fractions))
                )
        else:
            if len(self.states) == 0:
                raise InvalidSpec("explicit initial state needs states")


def colour_counts_from_fractions(fractions, n: int) -> list[int]:
    """Per-colour node counts: ``floor(fraction * n)`` with a tiny nudge so
    that binary-float products like ``0.1 * 30 = 2.9999...`` floor to the
    intended integer."""
    return [int(math.floor(f * n + 1e-9)) for f in fractions]


def initial_configuration(n: int, spec: InitialConfigSpec) -> Configuration:
    """Materialize an initial :class:`Configuration` on ``n`` nodes."""
    spec.validate()
    if spec.kind == "explicit":
        states = np.asarray(spec.states, dtype=np.int8)
        if states.size != n:
            raise InvalidSpec(
                f"explicit states have length {states.size}, expected {n}"
            )
        config = Configuration(states, k=spec.k)
    else:
        counts = colour_counts_from_fractions(spec.fractions, n)
        if sum(counts) > n:
            raise InvalidSpec("rounded colour counts exceed n", counts=counts)
        if sum(counts) == 0:
            raise AllAgnostic(
                "fractions too small: every colour floors to zero nodes",
                fractions=tuple(spec.fractions),
                n=n,
            )
        k = spec.k if spec.k is not None else max(len(counts), 1)
        if k < len(counts):
            raise InvalidSpec("k smaller than the number of fractions", k=k)
        states = np.zeros(n, dtype=np.int8)
        blocks = np.concatenate(
            [np.full(c, colour + 1, dtype=np.int8) for colour, c in enumerate(counts)]
            + [np.zeros(n - sum(counts), dtype=np.int8)]
        )
        if spec.kind == "arcs":
            states = blocks
        else:
            perm = np.random.default_rng(spec.seed).permutation(n)
            states[perm] = blocks
        config = Configuration(states, k=k)
    if config.gnostic_count == 0:
        raise AllAgnostic("initial configuration has no gnostic node")
    return config


# -- serialization -------------------------------------------------------------


def graph_to_json(g: Graph) -> str:
    """Serialize a graph to JSON with float weights in shortest round-trip
    form, so equal graphs produce byte-identical documents."""
    edges = [
        [int(u), int(v), float(w)]
        for u, v, w in zip(
            np.repeat(np.arange(g.n), np.diff(g.indptr)), g.indices, g.weights
        )
    ]
    labels = None if g.node_labels is None else [int(x) for x in g.node_labels]
    return json.dumps({"n": g.n, "edges": edges, "labels": labels})


def graph_from_json(text: str) -> Graph:
    try:
        doc = json.loads(text)
        n = int(doc["n"])
        edges = [(int(u), int(v), float(w)) for u, v, w in doc["edges"]]
        labels = doc.get("labels")
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed graph document: {exc}") from exc
    return Graph.from_edges(n, edges, node_labels=labels)


def config_to_json(config: Configuration, colour_names=None) -> str:
    if colour_names is None:
        colour_names = default_colour_names(config.k)
    if len(colour_names) != config.k:
        raise InvalidSpec("one colour name per colour is required")
    return json.dumps(
        {
            "n": config.n,
            "k": config.k,
            "states": [int(s) for s in config.states],
            "colours": list(colour_names),
        }
    )


def config_from_json(text: str) -> Configuration:
    try:
        doc = json.loads(text)
        states = doc["states"]
        k = int(doc["k"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed configuration document: {exc}") from exc
    config = Configuration(np.asarray(states, dtype=np.int8), k=k)
    if config.n != int(doc.get("n", config.n)):
        raise ParseError("configuration length disagrees with its n field")
    return config


def default_colour_names(k: int) -> list[str]:
    base = ["red", "blue", "green", "yellow", "purple", "orange"]
    if k <= len(base):
        return base[:k]
    return base + [f"colour_{i}" for i in range(len(base) + 1, k + 1)]
