"""Command-line entry point: ``swan-isac run|validate|default-config``.

Log verbosity follows the ``SWAN_ISAC_LOG_LEVEL`` environment variable
(``WARNING`` by default).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .experiments import (
    EXPERIMENT_TYPES,
    ConfigError,
    default_config_text,
    load_config,
    run_experiment,
)

LOG_ENV = "SWAN_ISAC_LOG_LEVEL"


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swan-isac",
                                description="Segmented pinching-antenna ISAC sweeps.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config and write CSV")
    run.add_argument("config")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help="CSV output path")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--unscaled-floors", action="store_true",
                     help="apply the rate floor to log2(1+SNR) without the 1/K factor")
    val = sub.add_parser("validate", help="parse and validate a config")
    val.add_argument("config")
    dc = sub.add_parser("default-config", help="print a default config")
    dc.add_argument("--experiment", choices=EXPERIMENT_TYPES, default="pareto")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "default-config":
            sys.stdout.write(default_config_text(args.experiment))
            return 0
        ec = load_config(args.config)
        if args.command == "validate":
            print(f"ok: {ec.experiment}")
            return 0
        if args.seed is not None:
            ec.seed = args.seed
        if args.unscaled_floors:
            ec.unscaled_floors = True
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        out = run_experiment(ec, args.out, args.threads)
        print(out)
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
