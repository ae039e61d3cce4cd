"""Command-line front end: bound reports and experiment runs.

    pgames bounds --game game.json --eps 0.2 [--variant log_linear] [--xi 0.1]
    pgames experiment --config sweep.toml [--check]

The experiment config is TOML with a top-level ``kind`` ("sweep" or
"comparison") and an ``[experiment]`` table mirroring ExperimentConfig.
In --check mode the exit code is nonzero unless every invariant assertion
on the produced result passes.
"""

from __future__ import annotations

import argparse
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .bounds import assemble_report
from .dynamics import DynamicsConfig, Rule
from .experiments import (
    ExperimentConfig,
    check_sweep_result,
    export_csv,
    run_comparison,
    run_sweep,
)
from .game_core import load_game_json

RULE_NAMES = {r.value: r for r in Rule}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pgames")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="compute a bounds report for a game")
    b.add_argument("--game", required=True, help="path to game JSON")
    b.add_argument("--eps", type=float, required=True)
    b.add_argument("--variant", default="log_linear",
                   choices=sorted(k for k in RULE_NAMES
                                  if k != "modified_symmetric"),
                   help="learning rule the report is computed for")
    b.add_argument("--xi", type=float, default=0.0,
                   help="noise bound or exploration share")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", help="write JSON here instead of stdout")

    e = sub.add_parser("experiment", help="run a sweep or comparison")
    e.add_argument("--config", required=True, help="path to TOML config")
    e.add_argument("--check", action="store_true",
                   help="verify result invariants; nonzero exit on failure")

    args = parser.parse_args(argv)
    try:
        if args.command == "bounds":
            return _cmd_bounds(args)
        return _cmd_experiment(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _cmd_bounds(args) -> int:
    with open(args.game) as fh:
        game = load_game_json(fh)
    config = DynamicsConfig(RULE_NAMES[args.variant], beta=0.0, xi=args.xi,
                            seed=args.seed)
    report = assemble_report(game, config, args.eps)
    text = report.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_experiment(args) -> int:
    with open(args.config, "rb") as fh:
        raw = tomllib.load(fh)
    kind = raw.get("kind", "sweep")
    table = dict(raw.get("experiment", {}))
    if "rule" in table:
        if table["rule"] not in RULE_NAMES:
            print(f"unknown rule {table['rule']!r}", file=sys.stderr)
            return 2
        table["rule"] = RULE_NAMES[table["rule"]]
    for key in ("delta_values", "eps_values"):
        if key in table:
            table[key] = tuple(table[key])
    config = ExperimentConfig(**table)

    if kind == "comparison":
        result = run_comparison(config)
    elif kind == "sweep":
        result = run_sweep(config)
    else:
        print(f"unknown experiment kind {kind!r}", file=sys.stderr)
        return 2

    if config.output_path:
        hit_path = export_csv(result, config.output_path)
        print(f"wrote {config.output_path} and {hit_path}")
    for curve in result.curves:
        hit = curve.aggregate_hit
        print(f"{curve.sweep_id}: mean-curve hit at "
              f"{'never' if hit is None else hit}")

    if args.check:
        failures = check_sweep_result(result, kind)
        for failure in failures:
            print(f"CHECK FAILED: {failure}", file=sys.stderr)
        return 1 if failures else 0
    return 0


if __name__ == "__main__":
    sys.exit(main())
