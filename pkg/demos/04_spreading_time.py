"""How long until nobody is agnostic, as the graph grows.

A single opinionated node has to reach everyone.  On a path under
asynchronous pulls the opinion front performs a random walk, so doubling n
roughly quadruples the number of rounds.  On a clique under synchronous
pulls every agnostic node samples a uniform neighbour each round, which
turns absorption into a coupon-collector sweep that only grows like log n.
"""

import numpy as np

from agvoter import Configuration
from agvoter.estimator import estimate_consensus
from agvoter.generators import GeneratorSpec, generate, path_graph
from agvoter.graphs import stationary_distribution

RUNS = 100


def single_gnostic_t_a(g, protocol, seed):
    states = np.zeros(g.n, dtype=np.int8)
    states[0] = 1
    mu = stationary_distribution(g).mu
    summary = estimate_consensus(
        g, mu, Configuration(states, k=2), protocol, runs=RUNS, seed_base=seed
    )
    return summary.t_agnostic


# --- path, async pull: quadratic front ---
print(f"path, async pull, one gnostic endpoint, {RUNS} runs")
previous = None
for n in (32, 64, 128):
    t_a = single_gnostic_t_a(path_graph(n), "async-pull", seed=40 + n)
    ratio = "" if previous is None else f"  ratio vs previous {t_a.mean() / previous:.2f}"
    print(f"  n={n:4d}  mean rounds {t_a.mean():9.1f}  max {t_a.max():6d}{ratio}")
    previous = t_a.mean()

# --- clique, sync pull: logarithmic sweep ---
print(f"\nclique, sync pull, one gnostic node, {RUNS} runs")
previous = None
for n in (128, 512, 2048):
    g = generate(GeneratorSpec("clique", n))
    t_a = single_gnostic_t_a(g, "sync-pull", seed=41 + n)
    ratio = "" if previous is None else f"  ratio vs previous {t_a.mean() / previous:.2f}"
    print(f"  n={n:4d}  mean rounds {t_a.mean():9.1f}  max {t_a.max():6d}{ratio}")
    previous = t_a.mean()
print("\nfor comparison, log(512)/log(128) =",
      f"{np.log(512) / np.log(128):.2f},",
      "log(2048)/log(512) =", f"{np.log(2048) / np.log(512):.2f}")
