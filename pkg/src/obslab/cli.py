"""Command-line entry point.

Usage: ``obslab <subcommand> --config <path> [--seed N] [--out DIR] [--jobs K]``

Subcommands map one-to-one onto experiment kinds; the config's ``kind`` must
match the subcommand. Exit codes: 0 success, 2 configuration error,
3 ingestion error, 4 internal-consistency failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import load_config
from .errors import ConfigError, ConsistencyError, IngestionError
from .sweeps import run_experiment, write_run_outputs

_SUBCOMMANDS = {
    "sweep-noise": "sweep_noise",
    "sweep-depth": "sweep_depth",
    "sweep-width": "sweep_width",
    "sweep-levels": "sweep_levels",
    "verify-theorem": "verify_theorem",
    "measures-report": "measures_report",
}

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INGESTION = 3
EXIT_CONSISTENCY = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="obslab",
        description="Seeded experiments on observation-space overfitting in LQR.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in _SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run a '{kind}' config")
        p.add_argument("--config", required=True, help="path to a TOML config")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's master seed")
        p.add_argument("--out", default=None,
                       help="override the config's output directory")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes (default 1)")
    return parser


def _print_summary(result) -> None:
    for row in result.summary_rows:
        parts = []
        for key, value in row.items():
            if value is None:
                continue
            if isinstance(value, float):
                parts.append(f"{key}={value:.6g}")
            elif not isinstance(value, (list, dict)):
                parts.append(f"{key}={value}")
        print("  " + " ".join(parts))
    for key, value in result.extras.items():
        print(f"  {key}={value}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    kind = _SUBCOMMANDS[args.command]
    try:
        cfg = load_config(args.config)
        if cfg.kind != kind:
            raise ConfigError(
                f"config kind {cfg.kind!r} does not match subcommand {args.command!r}"
            )
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg = dataclasses.replace(cfg, master_seed=args.seed)
        if args.out is not None:
            cfg = dataclasses.replace(cfg, output_dir=args.out)
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        result = run_experiment(cfg, jobs=args.jobs)
        out = write_run_outputs(result, cfg, cfg.output_dir)
        print(f"{kind}: {len(result.records)} records -> {out}")
        _print_summary(result)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IngestionError as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGESTION
    except ConsistencyError as exc:
        print(f"internal consistency failure: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
