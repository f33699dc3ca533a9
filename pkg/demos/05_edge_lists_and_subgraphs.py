"""Working with real edge lists: load, sample a subgraph, sanity-check it.

Large social graphs arrive as two-column edge lists.  The workflow here is
the one used for the network experiments: load the file, carve out a
connected induced subgraph by a random BFS-flavoured growth, check that its
edge boundaries look like those of a dense random graph, then estimate
winning probabilities on the piece.
"""

import tempfile
from pathlib import Path

import numpy as np

from agvoter.estimator import estimate_consensus
from agvoter.generators import (
    GeneratorSpec,
    InitialConfigSpec,
    generate,
    initial_configuration,
    load_edge_list,
    sample_connected_subgraph,
)
from agvoter.graphs import edge_boundary, stationary_distribution

# --- write a G(n, p) sample to disk as a plain edge list ---
n, p = 600, 0.03
g = generate(GeneratorSpec("erdos_renyi", n, p=p, seed=9))
pairs = g.undirected_pairs()
path = Path(tempfile.mkdtemp()) / "er.edges"
with open(path, "w") as fh:
    fh.write("# toy export, one undirected edge per line\n")
    for u, v in pairs:
        fh.write(f"{u} {v}\n")
print(f"wrote {pairs.shape[0]} edges to {path}")

# --- load it back ---
loaded = load_edge_list(path)
print(f"loaded n={loaded.n}, matches generator: {loaded.n == g.n}")

# --- random subsets should have unsurprising edge boundaries ---
rng = np.random.default_rng(10)
print("\nedge boundary checks against the dense expectation")
for size in (30, 60, 150):
    subset = rng.choice(loaded.n, size=size, replace=False)
    check = edge_boundary(loaded, subset, p)
    print(f"  |S|={size:4d}  boundary {check.boundary_edges:6d}"
          f"  expected {check.expected:8.1f}  within bound: {check.within_bound}")

# --- carve out a connected induced subgraph and estimate on it ---
sub = sample_connected_subgraph(loaded, 80, seed=11)
mu = stationary_distribution(sub).mu
s0 = initial_configuration(
    sub.n, InitialConfigSpec(kind="fractions", fractions=(0.1, 0.1), seed=12)
)
summary = estimate_consensus(sub, mu, s0, "async-pull", runs=200, seed_base=13)
print(f"\nsubgraph n={sub.n}, 10% red / 10% blue, async pull, 200 runs")
print(f"  P(red wins)  {summary.per_colour_mean[0]:.3f} +- {summary.final_se[0]:.3f}")
print(f"  P(blue wins) {summary.per_colour_mean[1]:.3f} +- {summary.final_se[1]:.3f}")
print(f"  mean rounds to all-gnostic {summary.mean_t_agnostic:.0f}")
