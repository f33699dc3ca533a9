"""Voter-model dynamics with agnostic nodes on weighted digraphs.

The package simulates pull and push opinion dynamics in which uncoloured
(agnostic) nodes adopt the colour of sampled neighbours, computes exact
consensus probabilities for small instances through absorbing-chain
analysis, and estimates them at scale with an early-stopping Monte Carlo
method scored by the stationary distribution of the edge-weight matrix.
"""

from .dynamics import (
    BLUE,
    Configuration,
    Protocol,
    RED,
    RunOutcome,
    default_round_cap,
    run,
    step,
    step_distribution,
)
from .errors import AgvoterError
from .estimator import (
    EARLY_STOP,
    FULL_CONSENSUS,
    EstimateSummary,
    VarianceComparison,
    cumulative_standard_error,
    estimate_consensus,
    variance_comparison,
)
from .exact import (
    AbsorptionProfile,
    ChainOracle,
    GnosticCensus,
    MartingaleCheck,
    brute_force_absorption,
    classical_win_probabilities,
    complete_graph_probability,
    immediate_resolution_q,
    martingale_value,
    one_step_martingale_check,
)
from .generators import (
    GeneratorSpec,
    InitialConfigSpec,
    config_from_json,
    config_to_json,
    default_colour_names,
    generate,
    graph_from_json,
    graph_to_json,
    initial_configuration,
    load_edge_list,
    path_graph,
    sample_connected_subgraph,
)
from .graphs import (
    BoundaryCheck,
    Graph,
    ReversibilityReport,
    StationaryDistribution,
    check_reversibility,
    edge_boundary,
    is_strongly_connected,
    stationary_distribution,
)
from .recipes import ExperimentRecipe, clique_census_estimate, run_recipe

__all__ = [
    "AbsorptionProfile",
    "AgvoterError",
    "BLUE",
    "BoundaryCheck",
    "ChainOracle",
    "Configuration",
    "EARLY_STOP",
    "EstimateSummary",
    "ExperimentRecipe",
    "FULL_CONSENSUS",
    "GeneratorSpec",
    "GnosticCensus",
    "Graph",
    "InitialConfigSpec",
    "MartingaleCheck",
    "Protocol",
    "RED",
    "ReversibilityReport",
    "RunOutcome",
    "StationaryDistribution",
    "VarianceComparison",
    "brute_force_absorption",
    "check_reversibility",
    "classical_win_probabilities",
    "clique_census_estimate",
    "complete_graph_probability",
    "config_from_json",
    "config_to_json",
    "cumulative_standard_error",
    "default_colour_names",
    "default_round_cap",
    "edge_boundary",
    "estimate_consensus",
    "generate",
    "graph_from_json",
    "graph_to_json",
    "immediate_resolution_q",
    "initial_configuration",
    "is_strongly_connected",
    "load_edge_list",
    "martingale_value",
    "one_step_martingale_check",
    "path_graph",
    "run",
    "run_recipe",
    "sample_connected_subgraph",
    "stationary_distribution",
    "step",
    "step_distribution",
    "variance_comparison",
]

__version__ = "0.1.0"
