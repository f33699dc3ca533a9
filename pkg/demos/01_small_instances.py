"""Walk through the two small reference instances.

The first is an undirected triangle with a pendant node: two nodes start
coloured, two start agnostic.  Because the graph is reversible the
stationary-weighted value of the start state equals the probability that
red conquers the graph.  The second is a directed three-node rotor whose
chain is not reversible; there the value process drifts downward after one
round and the would-be identity fails.
"""

import numpy as np

from agvoter import Configuration, Graph
from agvoter.exact import brute_force_absorption, one_step_martingale_check
from agvoter.graphs import check_reversibility, stationary_distribution

# --- reversible instance: triangle 0-1-2 plus pendant 3 attached to 2 ---
pendant = Graph.undirected_uniform(
    4, np.array([[0, 1], [0, 2], [1, 2], [2, 3]])
)
s0 = Configuration([2, 0, 1, 0], k=2)  # blue, agnostic, red, agnostic

sd = stationary_distribution(pendant)
print("pendant mu        :", sd.mu)  # degree / 2E = (2,2,3,1)/8
print("reversible        :", check_reversibility(pendant, sd).reversible)

profile = brute_force_absorption(pendant, s0, "sync-pull")
print("q (first red prob):", profile.q)
print("P(red wins)       :", profile.win_probability[0])
print("value X0 = mu . q :", profile.martingale_value)

check = one_step_martingale_check(pendant, sd.mu, s0, "sync-pull", 1)
print("one-step gap      :", check.gap)

# --- non-reversible instance: rotor with half-weight self-loops ---
rotor = Graph.from_matrix(
    np.array(
        [
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ]
    )
)
r0 = Configuration([1, 2, 0], k=2)  # red, blue, agnostic

rsd = stationary_distribution(rotor)
rev = check_reversibility(rotor, rsd)
print("\nrotor mu          :", rsd.mu)
print("reversible        :", rev.reversible, "worst", rev.worst_violation)

rprofile = brute_force_absorption(rotor, r0, "sync-pull")
print("P(red wins)       :", rprofile.win_probability[0])
print("value X0          :", rprofile.martingale_value)
rcheck = one_step_martingale_check(rotor, rsd.mu, r0, "sync-pull", 1)
print("E[X1 | S0]        :", rcheck.expected_next)
print("one-step gap      :", rcheck.gap, "(2/3 of the value is gone)")
