"""Complete graphs: the winning probability is the initial gnostic share.

Under asynchronous pulls on a complete graph, red wins with probability
r / (r + b) no matter how many agnostic nodes sit in between.  This script
checks the closed form three ways: the exact absorbing-chain oracle on a
small clique, the generic per-node simulator, and the census chain that
only tracks the (red, blue, agnostic) counts.
"""

import numpy as np

from agvoter import Configuration
from agvoter.estimator import estimate_consensus
from agvoter.exact import brute_force_absorption
from agvoter.generators import GeneratorSpec, generate
from agvoter.graphs import stationary_distribution
from agvoter.recipes import clique_census_estimate

# --- exact check on K6, every census with two gnostic colours present ---
g6 = generate(GeneratorSpec("clique", 6))
print("census -> oracle win vs r/(r+b)")
for r, b in [(1, 1), (2, 1), (3, 1), (2, 2), (4, 1)]:
    a = 6 - r - b
    states = np.array([1] * r + [2] * b + [0] * a, dtype=np.int8)
    profile = brute_force_absorption(g6, Configuration(states, k=2), "async-pull")
    print(
        f"  (r={r}, b={b}, a={a})  oracle {profile.win_probability[0]:.12f}"
        f"  gamma {r / (r + b):.12f}"
    )

# --- Monte Carlo on a bigger clique, both machineries ---
n, runs = 400, 400
g = generate(GeneratorSpec("clique", n))
mu = stationary_distribution(g).mu
states = np.zeros(n, dtype=np.int8)
states[:20] = 1
states[20:30] = 2  # gamma = 20/30
s0 = Configuration(states, k=2)

summary = estimate_consensus(g, mu, s0, "async-pull", runs=runs, seed_base=101)
scores, t_a = clique_census_estimate(n, 20, 10, runs=runs, seed_base=102)
print(f"\nK{n}, 20 red / 10 blue, {runs} early-stopped runs")
print(f"  per-node simulator : {summary.per_colour_mean[0]:.4f}"
      f" +- {summary.final_se[0]:.4f}")
print(f"  census chain       : {scores.mean():.4f}"
      f" +- {np.std(scores, ddof=1) / np.sqrt(runs):.4f}")
print(f"  closed form        : {20 / 30:.4f}")
print(f"  mean rounds to all-gnostic: {summary.mean_t_agnostic:.0f}"
      f" (census {t_a.mean():.0f})")
