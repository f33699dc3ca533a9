"""Named experiment recipes with deterministic per-point seeding.

A recipe is a fixed parameter grid; every grid point derives its seed from
``(seed_base, point_index)``, so rerunning a recipe with the same seed base
reproduces every output file byte for byte.  Outputs are CSV files plus a
``manifest.json`` describing each point; nothing in the outputs depends on
wall-clock time or absolute paths.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .dynamics import Configuration, Protocol
from .errors import InvalidSpec, MissingCorpus
from .estimator import EARLY_STOP, FULL_CONSENSUS, estimate_consensus
from .generators import (
    GeneratorSpec,
    InitialConfigSpec,
    generate,
    initial_configuration,
    load_edge_list,
    path_graph,
    sample_connected_subgraph,
)
from .graphs import stationary_distribution

RECIPE_NAMES = ("fig4", "fig5", "fig6", "fig7", "ta_scaling")

CORPUS_ENV = "AGV_CORPUS_DIR"

# Default run counts per recipe.
_DEFAULT_RUNS = {
    "fig4": 400,
    "fig5": 400,
    "fig6": 200,
    "fig7": 400,
    "ta_scaling": 200,
}


@dataclass(frozen=True)
class ExperimentRecipe:
    """A named experiment grid.

    Parameters
    ----------
    name : str
        One of ``fig4``, ``fig5``, ``fig6``, ``fig7``, ``ta_scaling``.
    out_dir : path-like
        Directory for CSV outputs and the manifest.
    seed_base : int
        Root seed; together with the name it fixes every output byte.
    runs : int, optional
        Override the per-recipe default run count.
    protocol : str, optional
        Override the per-point default protocol (where meaningful).
    large : bool
        Must be set for recipes whose memory or time footprint exceeds a
        desk machine (``fig6``).
    corpus_dir : path-like, optional
        Directory containing external edge lists; defaults to the
        ``AGV_CORPUS_DIR`` environment variable.
    """

    name: str
    out_dir: Path
    seed_base: int = 2024
    runs: int | None = None
    protocol: str | None = None
    sizes: tuple = ()
    force: bool = False
    large: bool = False
    threads: int = 1
    corpus_dir: Path | None = None

    def validate(self):
        if self.name not in RECIPE_NAMES:
            raise InvalidSpec(f"unknown recipe {self.name!r}", name=self.name)
        if self.runs is not None and self.runs < 1:
            raise InvalidSpec("runs must be positive", runs=self.runs)

    @property
    def effective_runs(self) -> int:
        return self.runs if self.runs is not None else _DEFAULT_RUNS[self.name]

    def resolve_corpus(self) -> Path | None:
        if self.corpus_dir is not None:
            return Path(self.corpus_dir)
        env = os.environ.get(CORPUS_ENV)
        return Path(env) if env else None


def _point_seed(seed_base: int, index: int) -> int:
    ss = np.random.SeedSequence(seed_base, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _find_corpus_file(corpus: Path, stem_hint: str) -> Path | None:
    if corpus is None or not corpus.is_dir():
        return None
    hits = sorted(
        p for p in corpus.iterdir()
        if p.is_file() and stem_hint in p.name.lower()
    )
    return hits[0] if hits else None


@njit(cache=True)
def _clique_census_run(n, r0, b0, rng):
    """Asynchronous pulls on a complete graph, tracked as a census chain.

    Per-node identity is irrelevant on a complete graph, so only the
    (red, blue, agnostic) census evolves.  Geometric skips jump over the
    rounds in which nothing changes.  Returns (red, blue, rounds) at the
    first moment no agnostic node remains.
    """
    r = r0
    b = b0
    a = n - r0 - b0
    t = np.int64(0)
    denom = float(n) * float(n - 1)
    while a > 0:
        w_resolve = float(a) * float(r + b)
        w_flip = 2.0 * float(r) * float(b)
        p_event = (w_resolve + w_flip) / denom
        if p_event >= 1.0:
            skip = np.int64(1)
        else:
            u = rng.random()
            skip = np.int64(math.floor(math.log1p(-u) / math.log1p(-p_event))) + 1
        t += skip
        pick = rng.random() * (w_resolve + w_flip)
        if pick < w_resolve:
            if pick < float(a) * float(r):
                r += 1
            else:
                b += 1
            a -= 1
        elif pick - w_resolve < float(r) * float(b):
            # a red node pulled a blue one
            r -= 1
            b += 1
        else:
            r += 1
            b -= 1
    return r, b, t


def clique_census_estimate(n, red, blue, runs, seed_base):
    """Early-stopping estimate of P(red wins) on a complete graph via the
    census chain.  Scores are the red share at the all-gnostic time, which
    is the stationary-mass score since the stationary vector is uniform."""
    scores = np.empty(runs, dtype=np.float64)
    t_a = np.empty(runs, dtype=np.int64)
    for i in range(runs):
        rng = np.random.default_rng(
            np.random.SeedSequence(seed_base, spawn_key=(0, i))
        )
        r, b, t = _clique_census_run(n, red, blue, rng)
        scores[i] = r / n
        t_a[i] = t
    return scores, t_a


def _se(x: np.ndarray) -> float:
    if x.size < 2:
        return float("nan")
    return float(np.std(x, ddof=1) / math.sqrt(x.size))


def _prepare_out_dir(recipe: ExperimentRecipe) -> Path:
    out = Path(recipe.out_dir)
    if out.exists():
        if any(out.iterdir()) and not recipe.force:
            raise FileExistsError(
                f"output directory {out} is not empty (use force to overwrite)"
            )
    else:
        out.mkdir(parents=True)
    return out


def _estimate_point(g, s0, protocol, runs, seed, mode, threads):
    mu = stationary_distribution(g)
    return estimate_consensus(
        g, mu, s0, protocol, runs=runs, seed_base=seed, mode=mode, threads=threads
    )


def _fractions_config(n, red_frac, blue_frac, layout, seed):
    spec = InitialConfigSpec(
        kind=("arcs" if layout == "arcs" else "fractions"),
        fractions=(red_frac, blue_frac),
        k=2,
        seed=seed,
    )
    return initial_configuration(n, spec)


def run_recipe(recipe: ExperimentRecipe) -> dict:
    """Execute a recipe and return its manifest (also written to disk)."""
    recipe.validate()
    out = _prepare_out_dir(recipe)
    builder = {
        "fig4": _run_fig4,
        "fig5": _run_fig5,
        "fig6": _run_fig6,
        "fig7": _run_fig7,
        "ta_scaling": _run_ta_scaling,
    }[recipe.name]
    manifest = {
        "recipe": recipe.name,
        "seed_base": int(recipe.seed_base),
        "runs": int(recipe.effective_runs),
        "points": builder(recipe, out),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return manifest


def _summarize(summary):
    return {
        "estimate": [float(x) for x in summary.per_colour_mean],
        "final_se": [float(x) for x in summary.final_se],
        "mean_t_agnostic": summary.mean_t_agnostic,
        "completed_runs": summary.completed_runs,
        "capped_runs": int(summary.capped_runs),
    }


def _run_fig4(recipe: ExperimentRecipe, out: Path) -> list:
    """Standard-error decay against run count on three 1001-node topologies,
    for both estimator modes."""
    runs = recipe.effective_runs
    protocol = Protocol.from_name(recipe.protocol or "sync-pull")
    n = 1001
    points = []
    corpus = recipe.resolve_corpus()
    pokec_file = _find_corpus_file(corpus, "pokec") if corpus else None

    jobs = [
        ("clique", lambda seed: (generate(GeneratorSpec("clique", n)),
                                 _fractions_config(n, 0.05, 0.05, "random", seed))),
        ("cycle", lambda seed: (generate(GeneratorSpec("cycle", n)),
                                _fractions_config(n, 0.05, 0.05, "arcs", seed))),
    ]
    if pokec_file is not None:
        def load_pokec(seed):
            g_full = load_edge_list(pokec_file)
            g = sample_connected_subgraph(g_full, n, seed=seed)
            return g, _fractions_config(n, 0.05, 0.05, "random", seed)

        jobs.append(("pokec_subgraph", load_pokec))

    index = 0
    for key, build in jobs:
        seed = _point_seed(recipe.seed_base, index)
        g, s0 = build(seed)
        entry = {
            "key": key,
            "n": int(g.n),
            "protocol": protocol.value,
            "seed": seed,
            "files": {},
            "results": {},
        }
        for mode in (EARLY_STOP, FULL_CONSENSUS):
            summary = _estimate_point(
                g, s0, protocol, runs, seed, mode, recipe.threads
            )
            runs_name = f"fig4_{key}_{mode}_runs.csv"
            se_name = f"fig4_{key}_{mode}_se.csv"
            summary.write_runs_csv(out / runs_name)
            summary.write_se_csv(out / se_name)
            entry["files"][mode] = [runs_name, se_name]
            entry["results"][mode] = _summarize(summary)
        points.append(entry)
        index += 1
    if pokec_file is None:
        points.append(
            {
                "key": "pokec_subgraph",
                "skipped": f"no pokec edge list found (set {CORPUS_ENV})",
            }
        )
    return points


def _run_fig5(recipe: ExperimentRecipe, out: Path) -> list:
    """Final standard error against graph size for two gnostic shares."""
    runs = recipe.effective_runs
    protocol = Protocol.from_name(recipe.protocol or "sync-pull")
    sizes = recipe.sizes or (301, 1001, 3001)
    shares = (0.05, 0.5)
    points = []
    rows = []
    index = 0
    for family in ("clique", "cycle"):
        for n in sizes:
            for share in shares:
                seed = _point_seed(recipe.seed_base, index)
                index += 1
                g = generate(GeneratorSpec(family, int(n)))
                layout = "arcs" if family == "cycle" else "random"
                s0 = _fractions_config(int(n), share / 2, share / 2, layout, seed)
                summary = _estimate_point(
                    g, s0, protocol, runs, seed, EARLY_STOP, recipe.threads
                )
                rows.append(
                    (
                        family,
                        int(n),
                        share,
                        summary.completed_runs,
                        float(summary.per_colour_mean[0]),
                        float(summary.final_se[0]),
                        summary.mean_t_agnostic,
                    )
                )
                points.append(
                    {
                        "key": f"{family}_n{n}_share{share}",
                        "family": family,
                        "n": int(n),
                        "gnostic_share": share,
                        "protocol": protocol.value,
                        "seed": seed,
                        "results": _summarize(summary),
                    }
                )
    table = out / "fig5_summary.csv"
    with open(table, "w") as fh:
        fh.write("family,n,gnostic_share,runs,mean_red,se_red,mean_t_agnostic\n")
        for row in rows:
            fh.write(",".join(repr(x) if isinstance(x, float) else str(x) for x in row) + "\n")
    return points


def _run_fig6(recipe: ExperimentRecipe, out: Path) -> list:
    """Full-corpus experiment; gated behind ``large`` because the loaded
    graph plus sampling tables take on the order of two gigabytes."""
    if not recipe.large:
        raise InvalidSpec(
            "fig6 loads a multi-million-node corpus; pass large=True "
            "(CLI: --large) to confirm"
        )
    corpus = recipe.resolve_corpus()
    pokec_file = _find_corpus_file(corpus, "pokec") if corpus else None
    if pokec_file is None:
        raise MissingCorpus(
            f"fig6 needs a pokec edge list under {CORPUS_ENV}", env=CORPUS_ENV
        )
    runs = recipe.effective_runs
    protocol = Protocol.from_name(recipe.protocol or "async-pull")
    points = []

    seed = _point_seed(recipe.seed_base, 0)
    g = load_edge_list(pokec_file)
    s0 = _fractions_config(g.n, 0.05, 0.05, "random", seed)
    summary = _estimate_point(g, s0, protocol, runs, seed, EARLY_STOP, recipe.threads)
    name = "fig6_pokec_runs.csv"
    summary.write_runs_csv(out / name)
    points.append(
        {
            "key": "pokec_full",
            "n": int(g.n),
            "protocol": protocol.value,
            "seed": seed,
            "files": [name],
            "results": _summarize(summary),
        }
    )

    seed_clique = _point_seed(recipe.seed_base, 1)
    n = g.n
    red = int(math.floor(0.05 * n + 1e-9))
    scores, t_a = clique_census_estimate(n, red, red, runs, seed_clique)
    name = "fig6_clique_runs.csv"
    with open(out / name, "w") as fh:
        fh.write("run,score_red,t_agnostic\n")
        for i in range(runs):
            fh.write(f"{i},{scores[i]!r},{int(t_a[i])}\n")
    points.append(
        {
            "key": "clique_census",
            "n": int(n),
            "protocol": "async-pull",
            "seed": seed_clique,
            "files": [name],
            "results": {
                "estimate": [float(scores.mean()), float(1.0 - scores.mean())],
                "final_se": [_se(scores), _se(scores)],
                "mean_t_agnostic": float(t_a.mean()),
            },
        }
    )
    return points


def _run_fig7(recipe: ExperimentRecipe, out: Path) -> list:
    """Community-structure sweep: SBM graphs with complete communities."""
    runs = recipe.effective_runs
    protocol = Protocol.from_name(recipe.protocol or "sync-pull")
    sizes = recipe.sizes or (300, 1000, 3000)
    comms = (50, 100)
    points = []
    rows = []
    index = 0
    for n in sizes:
        for c in comms:
            seed = _point_seed(recipe.seed_base, index)
            index += 1
            g = generate(
                GeneratorSpec("sbm", int(n), community_size=int(c), seed=seed)
            )
            s0 = _fractions_config(int(n), 0.05, 0.05, "random", seed)
            summary = _estimate_point(
                g, s0, protocol, runs, seed, EARLY_STOP, recipe.threads
            )
            rows.append(
                (
                    int(n),
                    int(c),
                    summary.completed_runs,
                    float(summary.per_colour_mean[0]),
                    float(summary.final_se[0]),
                    summary.mean_t_agnostic,
                )
            )
            points.append(
                {
                    "key": f"sbm_n{n}_c{c}",
                    "n": int(n),
                    "community_size": int(c),
                    "protocol": protocol.value,
                    "seed": seed,
                    "results": _summarize(summary),
                }
            )
    with open(out / "fig7_summary.csv", "w") as fh:
        fh.write("n,community_size,runs,mean_red,se_red,mean_t_agnostic\n")
        for row in rows:
            fh.write(",".join(repr(x) if isinstance(x, float) else str(x) for x in row) + "\n")
    return points


def _run_ta_scaling(recipe: ExperimentRecipe, out: Path) -> list:
    """All-gnostic time scaling: cliques under synchronous pulls and paths
    under asynchronous pulls."""
    runs = recipe.effective_runs
    clique_sizes = recipe.sizes or (128, 256, 512, 1024)
    path_sizes = (32, 64, 128)
    points = []
    rows = []
    index = 0

    def measure(key, g, s0, protocol, seed):
        mu = stationary_distribution(g)
        summary = estimate_consensus(
            g, mu, s0, protocol, runs=runs, seed_base=seed,
            mode=EARLY_STOP, threads=recipe.threads,
        )
        t = summary.t_agnostic
        rows.append(
            (
                key.split("_n")[0],
                Protocol.from_name(protocol).value,
                g.n,
                summary.completed_runs,
                float(t.mean()),
                float(np.std(t, ddof=1)),
                int(t.max()),
            )
        )
        points.append(
            {
                "key": key,
                "n": int(g.n),
                "protocol": Protocol.from_name(protocol).value,
                "seed": seed,
                "mean_t_agnostic": float(t.mean()),
                "max_t_agnostic": int(t.max()),
            }
        )

    for n in clique_sizes:
        seed = _point_seed(recipe.seed_base, index)
        index += 1
        g = generate(GeneratorSpec("clique", int(n)))
        s0 = _fractions_config(int(n), 0.05, 0.05, "random", seed)
        measure(f"clique_n{n}", g, s0, "sync-pull", seed)
    for n in path_sizes:
        seed = _point_seed(recipe.seed_base, index)
        index += 1
        g = path_graph(int(n))
        states = np.zeros(int(n), dtype=np.int8)
        states[0] = 1
        s0 = Configuration(states, k=2)
        measure(f"path_n{n}", g, s0, "async-pull", seed)

    with open(out / "ta_scaling.csv", "w") as fh:
        fh.write("family,protocol,n,runs,mean_t_a,std_t_a,max_t_a\n")
        for row in rows:
            fh.write(",".join(repr(x) if isinstance(x, float) else str(x) for x in row) + "\n")
    return points
