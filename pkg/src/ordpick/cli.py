"""``ordpick run --config FILE [flags]``; every flag mirrors a config key and wins over it."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .pipeline import (
    EXIT_CONFIG,
    EXIT_MISSING,
    EXIT_OK,
    EXIT_STAGE,
    ConfigError,
    MissingDependency,
    StageFailure,
    load_config,
    run,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ordpick", description="Learn variable orderings for projection-based solvers.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute pipeline stages")
    r.add_argument("--config", required=True, help="key = value configuration file")
    r.add_argument("--stages", help="comma-separated subset of 1a,1b,1c,1d,2a,2b,2c,2d,2e")
    r.add_argument("--seed", help="master seed")
    r.add_argument("--oracle", choices=("surrogate", "external"))
    r.add_argument("--cv", choices=("accuracy", "time"), help="cross-validation objective")
    r.add_argument("--models", help="comma-separated families, e.g. DT,KNN,MLP,SVM")
    r.add_argument("--timeout", help="per-ordering timeout in seconds")
    r.add_argument("--out", help="output directory")
    r.add_argument("--stamp", help="fixed name stamp instead of the current date/time")
    r.add_argument("--generate", help="generate COUNT synthetic problems (2/3 train, 1/3 test)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
    )
    overrides = {k: getattr(args, k) for k in
                 ("stages", "seed", "oracle", "cv", "models", "timeout", "out", "stamp", "generate")}
    if args.out:
        overrides["out"] = os.path.abspath(args.out)  # CLI paths are relative to the shell, not the config
    try:
        cfg = load_config(args.config, overrides)
        stamp = run(cfg)
    except ConfigError as exc:
        print(f"ordpick: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingDependency as exc:
        print(f"ordpick: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except StageFailure as exc:
        print(f"ordpick: {exc}", file=sys.stderr)
        return EXIT_STAGE
    print(f"ordpick: done (stamp {stamp})" if stamp else "ordpick: done")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
