"""Command line frontend.

Commands print JSON (or CSV where it is the natural shape) to stdout or to
``--out``.  Failures emit one JSON object ``{"code", "message", "context"}``
on stderr; the exit status is 0 on success, 1 for usage errors, and 2 for
runtime errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .dynamics import Configuration, Protocol, run
from .errors import (
    AgvoterError,
    AllAgnostic,
    InvalidSpec,
    ParseError,
    ProtocolMismatch,
)
from .estimator import (
    EARLY_STOP,
    FULL_CONSENSUS,
    estimate_consensus,
    variance_comparison,
)
from .exact import (
    ChainOracle,
    GnosticCensus,
    brute_force_absorption,
    classical_win_probabilities,
    complete_graph_probability,
    immediate_resolution_q,
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
)
from .graphs import check_reversibility, stationary_distribution
from .recipes import CORPUS_ENV, ExperimentRecipe, run_recipe

PROTOCOL_CHOICES = ["sync-pull", "async-pull", "async-push", "async-push-pull"]
MODE_CHOICES = {"early-stop": EARLY_STOP, "full-consensus": FULL_CONSENSUS}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _emit_error(code: str, message: str, context: dict | None = None):
    doc = {"code": code, "message": message, "context": context or {}}
    print(json.dumps(doc), file=sys.stderr)


def _write_text(text: str, out: str | None):
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _emit_json(doc, out: str | None):
    _write_text(json.dumps(doc, indent=2), out)


def _load_graph(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        head = fh.read(64).lstrip()
    if head.startswith("{"):
        return graph_from_json(Path(path).read_text())
    return load_edge_list(path)


def _parse_fractions(text: str):
    try:
        values = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise InvalidSpec(f"cannot parse fractions {text!r}") from None
    return values


def _load_config(args, n: int) -> Configuration:
    if getattr(args, "config", None):
        config = config_from_json(Path(args.config).read_text())
        if config.n != n:
            raise InvalidSpec(
                f"configuration has {config.n} nodes, graph has {n}"
            )
        return config
    if getattr(args, "fractions", None):
        spec = InitialConfigSpec(
            kind=("arcs" if args.arcs else "fractions"),
            fractions=_parse_fractions(args.fractions),
            k=args.colours,
            seed=args.init_seed,
        )
        return initial_configuration(n, spec)
    raise InvalidSpec("provide --config FILE or --fractions LIST")


def _parse_target(text: str, k: int) -> int:
    names = default_colour_names(k)
    token = text.strip().lower()
    if token in names:
        return names.index(token) + 1
    try:
        value = int(token)
    except ValueError:
        raise InvalidSpec(f"unknown target colour {text!r}") from None
    if not 1 <= value <= k:
        raise InvalidSpec(f"target colour {value} outside 1..{k}")
    return value


def _add_config_options(sub):
    sub.add_argument("--config", help="configuration JSON document")
    sub.add_argument(
        "--fractions",
        help="comma-separated per-colour shares, e.g. 0.05,0.05",
    )
    sub.add_argument(
        "--arcs",
        action="store_true",
        help="lay fractions out as contiguous blocks instead of randomly",
    )
    sub.add_argument("--init-seed", type=int, default=0)
    sub.add_argument(
        "--colours", type=int, default=2, help="number of colours for --fractions"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="agvoter", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen", help="generate a graph and print its JSON")
    gen.add_argument("--family", required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--p", type=float)
    gen.add_argument("--intra-p", type=float, default=1.0)
    gen.add_argument("--inter-p", type=float, default=0.05)
    gen.add_argument("--community-size", type=int)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out")

    stat = subs.add_parser(
        "stationary", help="stationary distribution and reversibility report"
    )
    stat.add_argument("--graph", required=True)
    stat.add_argument("--format", choices=["json", "csv"], default="json")
    stat.add_argument("--out")

    exact = subs.add_parser(
        "exact", help="exact win probabilities via the cheapest applicable method"
    )
    exact.add_argument("--graph", required=True)
    _add_config_options(exact)
    exact.add_argument("--protocol", choices=PROTOCOL_CHOICES, default="sync-pull")
    exact.add_argument("--target", default="red")
    exact.add_argument("--out")

    oracle = subs.add_parser(
        "oracle", help="absorbing-chain oracle profile for a start state"
    )
    oracle.add_argument("--graph", required=True)
    _add_config_options(oracle)
    oracle.add_argument("--protocol", choices=PROTOCOL_CHOICES, default="sync-pull")
    oracle.add_argument("--target", default="red")
    oracle.add_argument("--out")

    sim = subs.add_parser("simulate", help="run one trajectory")
    sim.add_argument("--graph", required=True)
    _add_config_options(sim)
    sim.add_argument("--protocol", choices=PROTOCOL_CHOICES, default="sync-pull")
    sim.add_argument(
        "--stop",
        choices=["all-gnostic", "consensus", "round-cap"],
        default="consensus",
    )
    sim.add_argument("--round-cap", type=int)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--trace", help="write a per-round counts CSV here")
    sim.add_argument("--trace-every", type=int, default=1)
    sim.add_argument("--out")

    est = subs.add_parser("estimate", help="Monte Carlo consensus estimate")
    est.add_argument("--graph", required=True)
    _add_config_options(est)
    est.add_argument("--protocol", choices=PROTOCOL_CHOICES, default="sync-pull")
    est.add_argument("--runs", type=int, default=400)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument(
        "--mode", choices=sorted(MODE_CHOICES), default="early-stop"
    )
    est.add_argument("--round-cap", type=int)
    est.add_argument("--threads", type=int, default=1)
    est.add_argument("--format", choices=["json", "csv"], default="json")
    est.add_argument("--out")

    comp = subs.add_parser(
        "compare-variance", help="early-stop versus full-consensus scores"
    )
    comp.add_argument("--graph", required=True)
    _add_config_options(comp)
    comp.add_argument("--protocol", choices=PROTOCOL_CHOICES, default="sync-pull")
    comp.add_argument("--runs", type=int, default=400)
    comp.add_argument("--seed", type=int, default=0)
    comp.add_argument("--round-cap", type=int)
    comp.add_argument("--threads", type=int, default=1)
    comp.add_argument("--format", choices=["json", "csv"], default="json")
    comp.add_argument("--out")

    exp = subs.add_parser("experiment", help="run a named experiment recipe")
    exp.add_argument("--name", required=True)
    exp.add_argument("--out-dir", required=True)
    exp.add_argument("--seed", type=int, default=2024)
    exp.add_argument("--runs", type=int)
    exp.add_argument("--protocol", choices=PROTOCOL_CHOICES)
    exp.add_argument("--force", action="store_true")
    exp.add_argument("--large", action="store_true")
    exp.add_argument("--threads", type=int, default=1)
    exp.add_argument(
        "--corpus-dir", help=f"external corpora directory (default ${CORPUS_ENV})"
    )

    return parser


def _is_complete(g) -> bool:
    if g.n < 2 or g.edge_count != g.n * (g.n - 1):
        return False
    if np.any(g.indices == np.repeat(np.arange(g.n), np.diff(g.indptr))):
        return False
    return bool(np.all(g._row_uniform))


def _cmd_gen(args) -> int:
    spec = GeneratorSpec(
        family=args.family,
        n=args.n,
        p=args.p,
        intra_p=args.intra_p,
        inter_p=args.inter_p,
        community_size=args.community_size,
        seed=args.seed,
    )
    g = generate(spec)
    _write_text(graph_to_json(g), args.out)
    return 0


def _cmd_stationary(args) -> int:
    g = _load_graph(args.graph)
    sd = stationary_distribution(g)
    report = check_reversibility(g, sd)
    if args.format == "csv":
        lines = ["node,label,mu"]
        for v in range(g.n):
            label = v if g.node_labels is None else int(g.node_labels[v])
            lines.append(f"{v},{label},{sd.mu[v]!r}")
        _write_text("\n".join(lines), args.out)
        return 0
    doc = {
        "n": g.n,
        "mu": [float(x) for x in sd.mu],
        "residual": sd.residual,
        "method": sd.method,
        "reversible": report.reversible,
        "worst_violation": {
            "v": report.worst_violation[0],
            "w": report.worst_violation[1],
            "gap": report.worst_violation[2],
        },
    }
    _emit_json(doc, args.out)
    return 0


def _cmd_exact(args) -> int:
    g = _load_graph(args.graph)
    config = _load_config(args, g.n)
    protocol = Protocol.from_name(args.protocol)
    target = _parse_target(args.target, config.k)
    names = default_colour_names(config.k)

    if config.is_all_gnostic:
        mu = stationary_distribution(g)
        win = classical_win_probabilities(g, mu, config)
        doc = {
            "method": "stationary-mass",
            "win_probability": {names[c]: float(win[c]) for c in range(config.k)},
        }
        _emit_json(doc, args.out)
        return 0

    if (
        protocol is Protocol.ASYNC_PULL
        and config.k == 2
        and _is_complete(g)
    ):
        gamma = complete_graph_probability(GnosticCensus.from_configuration(config))
        doc = {
            "method": "complete-graph-gamma",
            "win_probability": {names[0]: gamma, names[1]: 1.0 - gamma},
        }
        _emit_json(doc, args.out)
        return 0

    if protocol is Protocol.SYNC_PULL:
        mu = stationary_distribution(g)
        if check_reversibility(g, mu).reversible:
            try:
                win = {}
                for c in range(1, config.k + 1):
                    q = immediate_resolution_q(g, config, c)
                    win[names[c - 1]] = float(q @ mu.mu)
                doc = {
                    "method": "first-round-resolution",
                    "win_probability": win,
                    "note": "assumes the run reaches consensus with probability 1",
                }
                _emit_json(doc, args.out)
                return 0
            except InvalidSpec:
                pass

    profile = brute_force_absorption(g, config, protocol, target)
    doc = {"method": "absorbing-chain"}
    doc.update(profile.to_json_dict(names))
    _emit_json(doc, args.out)
    return 0


def _cmd_oracle(args) -> int:
    g = _load_graph(args.graph)
    config = _load_config(args, g.n)
    target = _parse_target(args.target, config.k)
    profile = brute_force_absorption(g, config, Protocol.from_name(args.protocol), target)
    _emit_json(profile.to_json_dict(default_colour_names(config.k)), args.out)
    return 0


def _cmd_simulate(args) -> int:
    g = _load_graph(args.graph)
    config = _load_config(args, g.n)
    rng = np.random.default_rng(args.seed)
    outcome = run(
        g,
        config,
        Protocol.from_name(args.protocol),
        stop=args.stop.replace("-", "_"),
        rng=rng,
        round_cap=args.round_cap,
        trace_path=args.trace,
        trace_every=args.trace_every,
    )
    names = default_colour_names(config.k)
    counts = outcome.final_config.counts
    doc = {
        "t_agnostic": outcome.t_agnostic,
        "t_consensus": outcome.t_consensus,
        "winner": None if outcome.winner is None else names[outcome.winner - 1],
        "capped": outcome.capped,
        "rounds_executed": outcome.rounds_executed,
        "final_counts": {
            "agnostic": int(counts[0]),
            **{names[c - 1]: int(counts[c]) for c in range(1, config.k + 1)},
        },
        "seed": args.seed,
    }
    _emit_json(doc, args.out)
    return 0


def _cmd_estimate(args) -> int:
    g = _load_graph(args.graph)
    config = _load_config(args, g.n)
    protocol = Protocol.from_name(args.protocol)
    mode = MODE_CHOICES[args.mode]
    mu = stationary_distribution(g) if mode == EARLY_STOP else None
    summary = estimate_consensus(
        g,
        mu,
        config,
        protocol,
        runs=args.runs,
        seed_base=args.seed,
        mode=mode,
        round_cap=args.round_cap,
        threads=args.threads,
    )
    if args.format == "csv":
        if args.out:
            summary.write_runs_csv(args.out)
        else:
            _write_runs_stdout(summary)
        return 0
    _emit_json(summary.to_json_dict(), args.out)
    return 0


def _write_runs_stdout(summary):
    import csv as _csv

    names = default_colour_names(summary.k)
    writer = _csv.writer(sys.stdout)
    header = ["run"] + [f"score_{c}" for c in names] + ["t_agnostic"]
    if summary.t_consensus is not None:
        header.append("t_consensus")
    writer.writerow(header)
    for i in range(summary.completed_runs):
        row = [i] + [repr(float(x)) for x in summary.scores[i]]
        row.append(int(summary.t_agnostic[i]))
        if summary.t_consensus is not None:
            row.append(int(summary.t_consensus[i]))
        writer.writerow(row)


def _cmd_compare_variance(args) -> int:
    g = _load_graph(args.graph)
    config = _load_config(args, g.n)
    mu = stationary_distribution(g)
    comp = variance_comparison(
        g,
        mu,
        config,
        Protocol.from_name(args.protocol),
        runs=args.runs,
        seed_base=args.seed,
        round_cap=args.round_cap,
        threads=args.threads,
    )
    if args.format == "csv":
        names = default_colour_names(comp.early.k)
        lines = ["colour,mean_early,se_early,var_early,mean_full,se_full,var_full"]
        for c in range(comp.early.k):
            lines.append(
                ",".join(
                    [names[c]]
                    + [
                        repr(float(x))
                        for x in (
                            comp.early.per_colour_mean[c],
                            comp.early.final_se[c],
                            comp.variance_early[c],
                            comp.full.per_colour_mean[c],
                            comp.full.final_se[c],
                            comp.variance_full[c],
                        )
                    ]
                )
            )
        _write_text("\n".join(lines), args.out)
        return 0
    _emit_json(comp.to_json_dict(), args.out)
    return 0


def _cmd_experiment(args) -> int:
    recipe = ExperimentRecipe(
        name=args.name,
        out_dir=Path(args.out_dir),
        seed_base=args.seed,
        runs=args.runs,
        protocol=args.protocol,
        force=args.force,
        large=args.large,
        threads=args.threads,
        corpus_dir=Path(args.corpus_dir) if args.corpus_dir else None,
    )
    manifest = run_recipe(recipe)
    _emit_json(manifest, None)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "stationary": _cmd_stationary,
    "exact": _cmd_exact,
    "oracle": _cmd_oracle,
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "compare-variance": _cmd_compare_variance,
    "experiment": _cmd_experiment,
}

_USAGE_ERRORS = (AllAgnostic, InvalidSpec, ProtocolMismatch)


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        _emit_error("usage", str(exc))
        return 1
    except SystemExit as exc:
        # --help and --version exit through here with their own status.
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except _USAGE_ERRORS as exc:
        _emit_error(exc.code, exc.message, exc.context)
        return 1
    except ParseError as exc:
        _emit_error(exc.code, exc.message, exc.context)
        return 2
    except AgvoterError as exc:
        _emit_error(exc.code, exc.message, exc.context)
        return 2
    except FileExistsError as exc:
        _emit_error("FileExistsError", str(exc))
        return 2
    except OSError as exc:
        _emit_error("io-error", str(exc), {"filename": getattr(exc, "filename", None)})
        return 2
    except ValueError as exc:
        _emit_error("usage", str(exc))
        return 1


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
