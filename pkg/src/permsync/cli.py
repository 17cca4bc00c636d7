"""Command line entry point: ``permsync {gen,run,sweep,verify}``.

Exit codes: 0 ok, 1 input error, 2 non-convergence (``run``) or a failed
check (``verify``).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .assoc import accuracy, read_bundle, read_labels, write_bundle, write_labels, generate_synthetic
from .consensus import ConsensusConfig, initial_state, round_labels, run_consensus
from .exceptions import ConfigError, DomainError, GraphGenerationError, ParseError, RankDeficiencyError
from .graph import gen_graph, read_graph, write_graph
from .simnet import simulate_consensus, simulate_doi, write_stats_csv
from .spectral import SpectralConfig, procrustes_correct, round_spectral, run_doi
from .sweep import (
    config_header,
    load_config,
    run_sweep,
    summarize,
    summary_name,
    write_summary,
    write_trials_csv,
)
from .verify import SUITES, run_suite

log = logging.getLogger("permsync")

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="permsync", description="Decentralized consistent data association.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic instance")
    g.add_argument("--n", type=int, default=20, help="number of sensors")
    g.add_argument("--m", type=int, default=50, help="number of targets")
    g.add_argument("--p", type=float, default=0.0, help="outlier fraction per pairwise association")
    g.add_argument("--edge-fraction", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="association bundle path")
    g.add_argument("--truth", help="also write ground-truth labels here")
    g.add_argument("--graph-out", help="also write the sensor graph here")

    r = sub.add_parser("run", help="solve one instance")
    r.add_argument("instance", help="association bundle")
    r.add_argument("--method", choices=("cs", "sp"), default="cs")
    r.add_argument("--graph", help="sensor graph file (default: implied by the associations)")
    r.add_argument("--truth", help="ground-truth labels, adds accuracy to the trace")
    r.add_argument("--seed", type=int, default=0, help="seed for random initializations")
    r.add_argument("--init", help="cs: identity|uniform|random_permutation; sp: identity|random")
    r.add_argument("--max-iters", type=int, help="cs rounds cap / sp outer iterations")
    r.add_argument("--inner-mode", choices=("exact_average", "linear_consensus"), default="linear_consensus")
    r.add_argument("--inner-iters", type=int, default=50)
    r.add_argument("--anchor", type=int, default=1, help="distinguished sensor (1-based)")
    r.add_argument("--out", required=True, help="output prefix: writes PREFIX.labels and PREFIX.trace.csv")
    r.add_argument("--stats", help="also run through the message-passing harness and write per-round stats")

    s = sub.add_parser("sweep", help="outlier sweep for both methods")
    s.add_argument("config")
    s.add_argument("--out", default=".", help="output directory")
    s.add_argument("--trials", type=int, help="override trials per point")
    s.add_argument("--seed", type=int, help="override master seed")
    s.add_argument("--inner-mode", choices=("exact_average", "linear_consensus"))
    s.add_argument("--max-iters", type=int, help="override consensus max_iters")
    s.add_argument("--workers", type=int, default=1)

    v = sub.add_parser("verify", help="run a property battery")
    v.add_argument("suite", help=f"one of: {', '.join(SUITES)}, all")
    v.add_argument("--seed", type=int, default=0)
    return parser


def _header(args, extra=()):
    keys = sorted(k for k in vars(args) if k not in ("verbose", "func"))
    return [f"permsync {args.command}"] + [f"{k} = {getattr(args, k)}" for k in keys] + list(extra)


def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    kind = "complete" if args.edge_fraction >= 1.0 else "random_subset"
    G = gen_graph(kind, args.n, args.edge_fraction, rng)
    A, truth = generate_synthetic(G, args.m, args.p, rng)
    header = _header(args)
    write_bundle(A, args.out, header)
    if args.truth:
        write_labels(truth, args.truth, header)
    if args.graph_out:
        write_graph(G, args.graph_out)
    return EXIT_OK


def cmd_run(args) -> int:
    A = read_bundle(args.instance)
    G = read_graph(args.graph) if args.graph else A.implied_graph()
    A.validate_for(G)
    truth = read_labels(args.truth) if args.truth else None
    anchor = args.anchor - 1
    rng = np.random.default_rng(args.seed)
    header = _header(args)
    prefix = Path(args.out)
    if args.method == "cs":
        cfg = ConsensusConfig(distinguished=anchor, init=args.init or "identity")
        if args.max_iters is not None:
            cfg.max_iters = args.max_iters
        cfg.validate(G.n)
        state = initial_state(G.n, A.m, cfg, rng)
        res = run_consensus(A, G, cfg, state=state, truth=truth)
        labels = round_labels(res.relaxed)
        converged = res.converged
        rows = [("round", "delta", "accuracy")] + [(t, f"{d:.6e}", "" if a is None else f"{a:.6f}")
                                                  for t, d, a in res.trace]
        if args.stats:
            _, stats = simulate_consensus(A, G, cfg, rounds=res.rounds, rng=np.random.default_rng(args.seed))
            write_stats_csv(stats, args.stats)
    else:
        cfg = SpectralConfig(inner_mode=args.inner_mode, inner_iters=args.inner_iters, anchor=anchor,
                             init=args.init or "identity")
        if args.max_iters is not None:
            cfg.outer_iters = args.max_iters
        res = run_doi(A, G, cfg, rng=rng, truth=truth)
        labels = round_spectral(procrustes_correct(res.relaxed, anchor))
        converged = res.converged
        rows = [("outer_round", "inner_rounds", "gram_residual", "accuracy")] + [
            (t, k, f"{g:.6e}", "" if a is None else f"{a:.6f}") for t, k, g, a in res.trace]
        if args.stats:
            _, stats = simulate_doi(A, G, cfg, outer_iters=res.outer_rounds, rng=np.random.default_rng(args.seed))
            write_stats_csv(stats, args.stats)
    summary = [f"converged = {converged}"]
    if truth is not None:
        summary.append(f"accuracy = {accuracy(labels, truth, anchor):.6f}")
    write_labels(labels, f"{prefix}.labels", header + summary)
    with open(f"{prefix}.trace.csv", "w", newline="") as fh:
        for ln in header:
            fh.write(f"# {ln}\n")
        csv.writer(fh).writerows(rows)
    for ln in summary:
        print(ln)
    return EXIT_OK if converged else EXIT_NONCONVERGED


def cmd_sweep(args) -> int:
    experiment = load_config(args.config)
    overrides = []
    if args.trials is not None:
        experiment.trials = args.trials
        overrides.append(f"override trials = {args.trials}")
    if args.seed is not None:
        experiment.seed = args.seed
        overrides.append(f"override seed = {args.seed}")
    if args.inner_mode is not None:
        experiment.spectral.inner_mode = args.inner_mode
        overrides.append(f"override inner_mode = {args.inner_mode}")
    if args.max_iters is not None:
        experiment.consensus.max_iters = args.max_iters
        overrides.append(f"override max_iters = {args.max_iters}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    results = run_sweep(experiment, workers=args.workers)
    log.info("sweep of %d trials took %.1fs", len(results), time.perf_counter() - t0)
    header = config_header(experiment) + overrides
    for (n, m, f), rows in summarize(results).items():
        path = out / summary_name(n, m, f)
        write_summary(path, rows, header)
        print(path)
    write_trials_csv(out / "trials.csv", results, header)
    print(out / "trials.csv")
    return EXIT_OK


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    if any(n not in SUITES for n in names):
        print(f"permsync verify: unknown suite {args.suite!r} (choose from {', '.join(SUITES)}, all)",
              file=sys.stderr)
        return EXIT_INPUT
    failed = 0
    for name in names:
        for res in run_suite(name, seed=args.seed):
            print(f"[{name}] {res.line()}")
            failed += not res.passed
    print(f"{'FAIL' if failed else 'PASS'}: {failed} failing check(s)")
    return EXIT_NONCONVERGED if failed else EXIT_OK


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ConfigError, DomainError, GraphGenerationError, OSError) as exc:
        print(f"permsync {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RankDeficiencyError as exc:
        print(f"permsync {args.command}: {exc}", file=sys.stderr)
        print("hint: identity starting blocks can miss the dominant subspace on small instances; "
              "try a random spectral init (--init random, or init = random under [spectral])", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
