"""Command-line front end.

Subcommands: run, replicate, sweep, oracle. Every SimConfig field has a flag;
a JSON config file supplies defaults and explicit flags win over it. Exit code
0 on success; any simulator or IO error prints a diagnostic to stderr and
exits 1 (argparse usage errors exit 2).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from .federation import FederationError
from .harness import (
    ConfigError,
    HarnessError,
    SimConfig,
    emit,
    oracle_command,
    replicate,
    run,
    sweep_alpha,
)
from .objectives import ObjectiveError
from .partition import PartitionError
from .protocol import ProtocolError

_ERRORS = (
    ConfigError,
    HarnessError,
    FederationError,
    ObjectiveError,
    PartitionError,
    ProtocolError,
    OSError,
    json.JSONDecodeError,
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    # None defaults keep "flag not given" distinguishable from real values,
    # so config-file settings survive unless explicitly overridden.
    parser.add_argument("--config", metavar="JSON", help="config file; flags override it")
    parser.add_argument("--horizon", "-T", type=int, help="total rounds per client")
    parser.add_argument("--clients", "-M", type=int, help="number of clients")
    parser.add_argument("--alpha", type=float, help="personalization weight in [0,1]")
    parser.add_argument("--objective", help="base objective name (garland, double_sine)")
    parser.add_argument("--spread", type=float, help="client shift scale")
    parser.add_argument("--noise", type=float, help="uniform noise half-width")
    parser.add_argument("--nu1", type=float, help="smoothness scale")
    parser.add_argument("--rho", type=float, help="smoothness decay per depth")
    parser.add_argument("--conf-c", type=float, dest="conf_c", help="confidence constant")
    parser.add_argument("--d-prime", type=float, dest="d_prime", help="near-optimality dimension")
    parser.add_argument("--depth-cap", type=int, dest="depth_cap", help="stop at this depth")
    parser.add_argument("--seed", type=int, help="master RNG seed")
    parser.add_argument("--stride", type=int, help="checkpoint spacing in rounds")
    parser.add_argument("--oracle-grid", type=int, dest="oracle_grid", help="oracle grid points")
    parser.add_argument(
        "--oracle-refine", type=int, dest="oracle_refine", help="oracle refinement points"
    )
    parser.add_argument(
        "--oracle-path", dest="oracle_path", help="precomputed oracle fixture to reuse"
    )
    parser.add_argument("--out", help="output path prefix for CSV/JSON artifacts")
    parser.add_argument("--transcript", help="write the message transcript here")


def _config_from_args(args: argparse.Namespace) -> SimConfig:
    config = SimConfig()
    if args.config:
        with open(args.config) as fh:
            config = SimConfig.from_dict(json.load(fh))
    overrides = {
        name: getattr(args, name)
        for name in config.to_dict()
        if getattr(args, name, None) is not None
    }
    return replace(config, **overrides).validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedband",
        description="Simulate federated phase-based elimination bandits on [0,1].",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one simulation")
    _add_config_flags(p_run)

    p_rep = sub.add_parser("replicate", help="independent seeded runs, mean/std summary")
    _add_config_flags(p_rep)
    p_rep.add_argument(
        "--seeds", type=int, nargs="+", required=True, help="two or more seeds"
    )

    p_sweep = sub.add_parser("sweep", help="one run per alpha, reward table")
    _add_config_flags(p_sweep)
    p_sweep.add_argument(
        "--alphas", type=float, nargs="+", required=True, help="alpha values in [0,1]"
    )

    p_oracle = sub.add_parser("oracle", help="write the brute-force optima fixture")
    _add_config_flags(p_oracle)

    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    result = run(config)
    final = float(result.regret_total[-1])
    print(
        f"run: T={config.horizon} M={config.clients} alpha={config.alpha} "
        f"objective={config.objective} seed={config.seed}"
    )
    print(
        f"  phases={result.phases_completed}/{result.depth_limit}"
        f"{' (truncated)' if result.truncated else ''}"
        f" round_trips={result.ledger.total_round_trips}"
        f" scalars_up={result.ledger.total_up}"
        f" scalars_down={result.ledger.total_down}"
    )
    print(f"  regret_total={final:.6f} avg_per_round={final / config.horizon:.3e}")
    if config.out:
        for path in emit(result, config.out):
            print(f"  wrote {path}")
    return 0


def _cmd_replicate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    summary = replicate(config, args.seeds)
    final_mean = float(summary.regret_mean[-1])
    final_std = float(summary.regret_std[-1])
    print(
        f"replicate: {len(summary.seeds)} seeds, T={config.horizon} "
        f"M={config.clients} alpha={config.alpha} objective={config.objective}"
    )
    print(f"  final regret mean={final_mean:.6f} std={final_std:.6f}")
    if config.out:
        for path in emit(summary, config.out):
            print(f"  wrote {path}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    table = sweep_alpha(config, args.alphas)
    print(
        f"sweep: {len(table.rows)} alphas, T={config.horizon} M={config.clients} "
        f"objective={config.objective}"
    )
    print(f"  best_local={table.best_local:.6f} best_global={table.best_global:.6f}")
    for row in table.rows:
        print(
            f"  alpha={row.alpha:g} personalized={row.reward_personalized:.6f} "
            f"local={row.reward_local:.6f} global={row.reward_global:.6f}"
        )
    if config.out:
        for path in emit(table, config.out):
            print(f"  wrote {path}")
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    report, path = oracle_command(config, path=config.out)
    print(
        f"oracle: objective={config.objective} M={config.clients} "
        f"spread={config.spread} alpha={config.alpha} grid={config.oracle_grid}"
    )
    print(f"  global max {report.global_max:.9f} at x={report.global_argmax:.9f}")
    print(f"  mean personal max {float(np.mean(report.personal_max)):.9f}")
    print(f"  wrote {path}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "replicate": _cmd_replicate,
    "sweep": _cmd_sweep,
    "oracle": _cmd_oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _ERRORS as exc:
        print(f"fedband: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
