import numpy as np
import pytest

from agvoter import Configuration, Graph

# Four-node fixture: triangle {0,1,2} plus pendant node 3 hanging off node 2.
# All rows uniform, undirected, so the chain is reversible with stationary
# mass proportional to degree: mu = (2, 2, 3, 1) / 8.
PENDANT_EDGES = [
    (0, 1, 0.5),
    (0, 2, 0.5),
    (1, 0, 0.5),
    (1, 2, 0.5),
    (2, 0, 1 / 3),
    (2, 1, 1 / 3),
    (2, 3, 1 / 3),
    (3, 2, 1.0),
]
PENDANT_MU = np.array([2, 2, 3, 1], dtype=np.float64) / 8
# blue at 0, red at 2, nodes 1 and 3 agnostic
PENDANT_S0 = np.array([2, 0, 1, 0], dtype=np.int8)
PENDANT_WIN_RED = 5 / 8

# Three-node rotor: each node keeps its state with probability 1/2 or moves
# mass one step around the ring, so mu is uniform but detailed balance fails
# on every ring edge with gap 1/6.
ROTOR_MATRIX = np.array(
    [
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ]
)
ROTOR_MU = np.full(3, 1 / 3)
ROTOR_S0 = np.array([1, 2, 0], dtype=np.int8)
ROTOR_Q = np.array([1.0, 0.0, 2 / 3])
ROTOR_WIN_RED = 1 / 3
ROTOR_X0 = 5 / 9
ROTOR_EX1 = 7 / 18
ROTOR_GAP = 1 / 6
ROTOR_VIOLATION = (0, 1, 1 / 6)

# Classical (agnostic-free) instance on the pendant graph: the two formerly
# agnostic nodes carry a third colour, so the win masses are the stationary
# masses per colour, (3/8, 2/8, 3/8).
CLASSICAL_S0 = np.array([2, 3, 1, 3], dtype=np.int8)
CLASSICAL_WIN = np.array([3 / 8, 2 / 8, 3 / 8])


@pytest.fixture(scope="session")
def pendant_graph():
    return Graph.from_edges(4, PENDANT_EDGES)


@pytest.fixture(scope="session")
def pendant_config():
    return Configuration(PENDANT_S0, k=2)


@pytest.fixture(scope="session")
def rotor_graph():
    return Graph.from_matrix(ROTOR_MATRIX)


@pytest.fixture(scope="session")
def rotor_config():
    return Configuration(ROTOR_S0, k=2)


def random_undirected_graph(n, rng, p=0.6, self_loop_on=None):
    """Connected undirected uniform-weight graph on n nodes for suites.

    Adds a spanning path, then extra edges with probability p; an optional
    self-loop makes the sync chain aperiodic without breaking reversibility.
    """
    pairs = {(v, v + 1) for v in range(n - 1)}
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                pairs.add((u, v))
    if self_loop_on is not None:
        pairs.add((self_loop_on, self_loop_on))
    return Graph.undirected_uniform(n, sorted(pairs))


def random_configuration(n, rng, k=2, ensure_gnostic=True, ensure_agnostic=False):
    states = rng.integers(0, k + 1, size=n).astype(np.int8)
    if ensure_gnostic and not np.any(states > 0):
        states[int(rng.integers(0, n))] = 1
    if ensure_agnostic and not np.any(states == 0):
        states[int(rng.integers(0, n))] = 0
    return Configuration(states, k=k)
