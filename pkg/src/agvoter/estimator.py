"""Monte Carlo estimation of consensus probabilities.

Two modes share one interface.  ``early_stop`` simulates only until no
agnostic node remains and then scores the frozen configuration with the
stationary-mass identity, which is exact conditional on the reached
configuration; averaging those scores gives an unbiased estimator whose
per-run variance cannot exceed that of running to consensus.
``full_consensus`` simulates to a monochromatic state and scores the
winner 0/1.

Runs are reproducible and order-independent: run ``i`` of a given mode
draws from ``SeedSequence(seed_base, spawn_key=(stream, i))`` where the
stream id is fixed per mode, so early-stop and full-consensus estimates
never share randomness and thread scheduling cannot change any result.
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import Configuration, Protocol, run
from .errors import CapWithoutProgress, CappedRuns
from .exact import classical_win_probabilities
from .generators import default_colour_names
from .graphs import Graph, _as_mu

EARLY_STOP = "early_stop"
FULL_CONSENSUS = "full_consensus"
_MODE_STREAMS = {EARLY_STOP: 0, FULL_CONSENSUS: 1}


@dataclass(frozen=True)
class EstimateSummary:
    """Aggregated Monte Carlo estimate.

    ``scores`` holds one row per completed run and one column per colour;
    ``cumulative_se`` row ``i`` is the standard error of the mean over the
    first ``i + 1`` runs (sample standard deviation with an ``i`` divisor,
    so its first row is NaN).  Runs that hit the round cap are excluded
    from every statistic and only counted in ``capped_runs``.
    """

    mode: str
    protocol: Protocol
    seed_base: int
    requested_runs: int
    capped_runs: int
    per_colour_mean: np.ndarray
    cumulative_se: np.ndarray
    scores: np.ndarray
    t_agnostic: np.ndarray
    t_consensus: np.ndarray | None

    @property
    def completed_runs(self) -> int:
        return int(self.scores.shape[0])

    @property
    def k(self) -> int:
        return int(self.scores.shape[1])

    @property
    def final_se(self) -> np.ndarray:
        return self.cumulative_se[-1]

    @property
    def sample_variance(self) -> np.ndarray:
        return np.var(self.scores, axis=0, ddof=1)

    @property
    def mean_t_agnostic(self) -> float:
        return float(np.mean(self.t_agnostic))

    @property
    def max_t_agnostic(self) -> int:
        return int(np.max(self.t_agnostic))

    def to_json_dict(self, colour_names=None) -> dict:
        names = colour_names or default_colour_names(self.k)
        doc = {
            "mode": self.mode,
            "protocol": self.protocol.value,
            "seed_base": int(self.seed_base),
            "requested_runs": int(self.requested_runs),
            "completed_runs": self.completed_runs,
            "capped_runs": int(self.capped_runs),
            "estimate": {
                names[c]: float(self.per_colour_mean[c]) for c in range(self.k)
            },
            "final_se": {
                names[c]: float(self.final_se[c]) for c in range(self.k)
            },
            "mean_t_agnostic": self.mean_t_agnostic,
            "max_t_agnostic": self.max_t_agnostic,
        }
        if self.t_consensus is not None:
            doc["mean_t_consensus"] = float(np.mean(self.t_consensus))
        return doc

    def write_runs_csv(self, path, colour_names=None):
        names = colour_names or default_colour_names(self.k)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["run"] + [f"score_{c}" for c in names] + ["t_agnostic"]
            if self.t_consensus is not None:
                header.append("t_consensus")
            writer.writerow(header)
            for i in range(self.completed_runs):
                row = [i] + [repr(float(x)) for x in self.scores[i]]
                row.append(int(self.t_agnostic[i]))
                if self.t_consensus is not None:
                    row.append(int(self.t_consensus[i]))
                writer.writerow(row)

    def write_se_csv(self, path, colour_names=None):
        names = colour_names or default_colour_names(self.k)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["runs"]
                + [f"mean_{c}" for c in names]
                + [f"se_{c}" for c in names]
            )
            means = np.cumsum(self.scores, axis=0) / np.arange(
                1, self.completed_runs + 1
            ).reshape(-1, 1)
            for i in range(self.completed_runs):
                writer.writerow(
                    [i + 1]
                    + [repr(float(x)) for x in means[i]]
                    + [repr(float(x)) for x in self.cumulative_se[i]]
                )


def cumulative_standard_error(scores: np.ndarray) -> np.ndarray:
    """Standard error of the running mean, with NaN for the single-run row.

    Uses the sample variance with denominator ``i - 1`` over the first
    ``i`` runs, divided by ``i`` before the square root.
    """
    m = scores.shape[0]
    counts = np.arange(1, m + 1, dtype=np.float64).reshape(-1, 1)
    cs = np.cumsum(scores, axis=0)
    cs2 = np.cumsum(scores * scores, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        var = (cs2 - cs * cs / counts) / (counts - 1.0)
        var = np.maximum(var, 0.0)
        se = np.sqrt(var / counts)
    se[0, :] = np.nan
    return se


def _run_seed(seed_base: int, mode: str, index: int) -> np.random.Generator:
    stream = _MODE_STREAMS[mode]
    return np.random.default_rng(
        np.random.SeedSequence(seed_base, spawn_key=(stream, index))
    )


def estimate_consensus(
    g: Graph,
    mu,
    s0: Configuration,
    protocol,
    runs: int,
    seed_base: int,
    mode: str = EARLY_STOP,
    *,
    round_cap: int | None = None,
    threads: int = 1,
) -> EstimateSummary:
    """Estimate per-colour consensus probabilities over ``runs`` trajectories.

    Parameters
    ----------
    mu : StationaryDistribution or array
        Stationary weights used to score early-stopped runs.  Ignored by
        ``full_consensus`` mode (pass None there if preferred).
    mode : {"early_stop", "full_consensus"}
    threads : int
        Worker threads; results are identical for any thread count.

    Raises
    ------
    CappedRuns
        If every run hit its round cap.
    """
    protocol = Protocol.from_name(protocol)
    if mode not in _MODE_STREAMS:
        raise ValueError(f"unknown estimator mode {mode!r}")
    if runs < 1:
        raise ValueError("runs must be positive")
    if mode == EARLY_STOP:
        vec = _as_mu(mu, g.n)
        if protocol.uses_push:
            warnings.warn(
                "early stopping with a push protocol: the stationary-mass "
                "score is only guaranteed unbiased for pull dynamics",
                UserWarning,
                stacklevel=2,
            )
    k = s0.k
    scores = np.full((runs, k), np.nan, dtype=np.float64)
    t_a = np.full(runs, -1, dtype=np.int64)
    t_c = np.full(runs, -1, dtype=np.int64)
    capped = np.zeros(runs, dtype=bool)

    def one(i: int):
        rng = _run_seed(seed_base, mode, i)
        stop = "all_gnostic" if mode == EARLY_STOP else "consensus"
        try:
            outcome = run(g, s0, protocol, stop=stop, rng=rng, round_cap=round_cap)
        except CapWithoutProgress as exc:
            outcome = exc.outcome
        if outcome.capped:
            capped[i] = True
            return
        t_a[i] = outcome.t_agnostic
        if mode == EARLY_STOP:
            scores[i] = classical_win_probabilities(g, vec, outcome.final_config)
        else:
            t_c[i] = outcome.t_consensus
            onehot = np.zeros(k)
            onehot[outcome.winner - 1] = 1.0
            scores[i] = onehot

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(runs)))
    else:
        for i in range(runs):
            one(i)

    keep = ~capped
    n_capped = int(np.count_nonzero(capped))
    if not np.any(keep):
        raise CappedRuns(
            "all runs hit the round cap", requested=runs, capped=n_capped
        )
    kept_scores = scores[keep]
    return EstimateSummary(
        mode=mode,
        protocol=protocol,
        seed_base=seed_base,
        requested_runs=runs,
        capped_runs=n_capped,
        per_colour_mean=kept_scores.mean(axis=0),
        cumulative_se=cumulative_standard_error(kept_scores),
        scores=kept_scores,
        t_agnostic=t_a[keep],
        t_consensus=(t_c[keep] if mode == FULL_CONSENSUS else None),
    )


@dataclass(frozen=True)
class VarianceComparison:
    """Early-stop against full-consensus estimates on the same instance."""

    early: EstimateSummary
    full: EstimateSummary

    @property
    def variance_early(self) -> np.ndarray:
        return self.early.sample_variance

    @property
    def variance_full(self) -> np.ndarray:
        return self.full.sample_variance

    def to_json_dict(self, colour_names=None) -> dict:
        k = self.early.k
        names = colour_names or default_colour_names(k)
        return {
            "early_stop": self.early.to_json_dict(names),
            "full_consensus": self.full.to_json_dict(names),
            "variance_early": {
                names[c]: float(self.variance_early[c]) for c in range(k)
            },
            "variance_full": {
                names[c]: float(self.variance_full[c]) for c in range(k)
            },
        }


def variance_comparison(
    g: Graph,
    mu,
    s0: Configuration,
    protocol,
    runs: int,
    seed_base: int,
    *,
    round_cap: int | None = None,
    threads: int = 1,
) -> VarianceComparison:
    """Run both estimator modes with disjoint seed streams and compare."""
    early = estimate_consensus(
        g, mu, s0, protocol, runs, seed_base, EARLY_STOP,
        round_cap=round_cap, threads=threads,
    )
    full = estimate_consensus(
        g, mu, s0, protocol, runs, seed_base, FULL_CONSENSUS,
        round_cap=round_cap, threads=threads,
    )
    return VarianceComparison(early=early, full=full)
