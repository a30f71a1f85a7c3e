"""Command line interface.

Subcommands: train, eval, analyze, gradcheck, oracle. Exit codes: 0 success,
1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from ..config import ConfigError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _build_parser() -> _Parser:
    parser = _Parser(prog="openteam")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run a training job")
    train.add_argument("--config", required=True)
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--out", required=True)

    ev = sub.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--config", required=True)
    ev.add_argument("--episodes", type=int, required=True)
    ev.add_argument("--team-limit", type=int, default=None)
    ev.add_argument("--seed", type=int, default=0)

    an = sub.add_parser("analyze", help="pairwise utility analysis")
    an.add_argument("--checkpoint", required=True)
    an.add_argument("--config", required=True)
    an.add_argument("--out", required=True)
    an.add_argument("--episodes", type=int, default=10)
    an.add_argument("--seed", type=int, default=0)
    an.add_argument("--literal-deviation", action="store_true")

    gc = sub.add_parser("gradcheck", help="run the gradient-check suite")
    gc.add_argument("--instances", type=int, default=20)
    gc.add_argument("--seed", type=int, default=0)

    orc = sub.add_parser("oracle", help="run the marginalization brute-force suite")
    orc.add_argument("--instances", type=int, default=1000)
    orc.add_argument("--seed", type=int, default=0)

    return parser


def cli(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "train":
            from .run import load_config, run_training

            cfg = load_config(args.config)
            if args.seed is not None:
                cfg = replace(cfg, seed=args.seed).validate()
            out = run_training(cfg, args.out)
            print(f"run complete: {out}")
            return 0

        if args.command == "eval":
            from .run import evaluate, load_config

            if args.episodes < 1:
                print("error: --episodes must be >= 1", file=sys.stderr)
                return 2
            cfg = load_config(args.config)
            record = evaluate(
                args.checkpoint, cfg, args.episodes, args.seed, team_limit=args.team_limit
            )
            print(record.to_json())
            return 0

        if args.command == "analyze":
            from .analyze import analyze_pairwise, write_analysis
            from .run import load_config

            cfg = load_config(args.config)
            result = analyze_pairwise(
                args.checkpoint,
                cfg,
                episodes=args.episodes,
                seed=args.seed,
                literal=args.literal_deviation,
            )
            write_analysis(result, args.out)
            print(f"analysis written: {args.out}")
            return 0

        if args.command == "gradcheck":
            from .suites import gradient_suite

            label, err = gradient_suite(instances=args.instances, seed=args.seed)
            print(f"max gradient error {err:.3e} ({label})")
            return 0 if err <= 1e-4 else 1

        if args.command == "oracle":
            from .suites import marginalization_suite

            worst = marginalization_suite(instances=args.instances, seed=args.seed)
            print(f"worst marginalization relative error {worst:.3e}")
            return 0 if worst <= 1e-6 else 1
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


def main():
    sys.exit(cli(sys.argv[1:]))
