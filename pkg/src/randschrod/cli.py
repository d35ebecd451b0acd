"""Command-line front end.

One subcommand per experiment kind; every subcommand takes the same
flags and requires a config file whose experiment.kind matches the
subcommand.  Exit codes: 0 success, 2 validation failure, 3 numerical
failure, 4 a checked inequality or assertion did not hold.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
import yaml

from .config import (
    ConfigError,
    EXPERIMENT_KINDS,
    build_model,
    load_config,
    resolve_config,
    validate_config,
)
from .runner import CheckFailure, run

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randschrod",
        description="Numerical experiments on random Schroedinger operators",
    )
    sub = parser.add_subparsers(dest="kind", required=True, metavar="EXPERIMENT")
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} config")
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override execution.master_seed")
        p.add_argument("--out", default=None,
                       help="override the output root directory")
        p.add_argument("--threads", type=int, default=None,
                       help="override execution.threads")
        p.add_argument("--validate-only", action="store_true",
                       help="check the config and exit without computing")
    return parser


def _apply_overrides(config, args) -> None:
    if not isinstance(config, dict):
        return
    execution = config.get("execution")
    if not isinstance(execution, dict):
        execution = {}
        config["execution"] = execution
    if args.seed is not None:
        execution["master_seed"] = args.seed
    if args.threads is not None:
        execution["threads"] = args.threads


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    try:
        config = load_config(args.config)
    except (OSError, yaml.YAMLError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    _apply_overrides(config, args)

    declared = None
    if isinstance(config, dict) and isinstance(config.get("experiment"), dict):
        declared = config["experiment"].get("kind")
    if declared is not None and declared != args.kind:
        print(
            f"config error: experiment.kind: config declares {declared!r} "
            f"but the {args.kind!r} subcommand was invoked",
            file=sys.stderr,
        )
        return EXIT_VALIDATION

    errors = validate_config(config)
    if errors:
        for message in errors:
            print(f"config error: {message}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.validate_only:
        try:
            build_model(resolve_config(config))
        except ConfigError as exc:
            for message in exc.errors:
                print(f"config error: {message}", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"[{args.kind}] config OK")
        return EXIT_OK

    try:
        envelope = run(config, out_root=args.out)
    except ConfigError as exc:
        for message in exc.errors:
            print(f"config error: {message}", file=sys.stderr)
        return EXIT_VALIDATION
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError,
            RuntimeError, ValueError) as exc:
        # compute-stage rejections (empty fit window, singular probe,
        # stalled recursion) are numerical failures, not config errors
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    print(f"[{args.kind}] {envelope.summary} -> {envelope.directory}")
    if envelope.check_passed is False:
        print(f"check failed: {envelope.check.get('what', '')}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
