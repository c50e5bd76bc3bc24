from __future__ import annotations

import argparse
import json
import sys

from .config import EXPERIMENTS, load_experiment_config
from .errors import ConfigError, SnanError
from .experiments import run_experiment
from .outputs import emit_outputs
from .settings import configure_logging
from .sic_table import (
    DEFAULT_DECAYS,
    DEFAULT_THRESHOLDS,
    DEFAULT_WEIGHTS,
    build_sic_table,
    save_sic_table,
)

DEFAULT_TABLE_PATH = "sic_table.csv"


def _add_experiment_parser(subparsers, name: str) -> None:
    parser = subparsers.add_parser(name, help=f"Run the {name} experiment")
    parser.add_argument(
        "--config",
        default=name,
        help=f"YAML config path or shipped config name (default: {name})",
    )
    parser.add_argument("--seed", type=int, default=None, help="Override the config seed")
    parser.add_argument("--out", default=None, help="Override the output directory")
    parser.add_argument(
        "--ablate-astrocyte",
        action="store_true",
        help="Disconnect astrocyte outputs (control run)",
    )
    parser.add_argument(
        "--replay",
        default=None,
        help="Replay a recorded drive CSV instead of simulating the lattice (chaos only)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snan",
        description="Deterministic spiking neuron-astrocyte network experiments.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        _add_experiment_parser(subparsers, name)

    table_parser = subparsers.add_parser("sic-table", help="Generate the SIC configuration table")
    table_parser.add_argument(
        "--weights",
        type=int,
        nargs="+",
        default=list(DEFAULT_WEIGHTS),
        help="IP3-to-SIC weights to scan (default: powers of two 1..1024)",
    )
    table_parser.add_argument(
        "--decays",
        type=int,
        nargs="+",
        default=list(DEFAULT_DECAYS),
        help="SIC current decays to scan (default: 64..4096 in steps of 64)",
    )
    table_parser.add_argument(
        "--thresholds",
        type=int,
        nargs="+",
        default=list(DEFAULT_THRESHOLDS),
        help="SG thresholds to scan (default: powers of two 16..1024)",
    )
    table_parser.add_argument("--dt-ms", type=float, default=1.0, help="Step length in ms (default: 1.0)")
    table_parser.add_argument(
        "--out",
        default=DEFAULT_TABLE_PATH,
        help=f"CSV path to write (default: {DEFAULT_TABLE_PATH})",
    )
    return parser


def _error(command: str, exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "command": command}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _run(args) -> int:
    if args.command == "sic-table":
        table = build_sic_table(args.weights, args.decays, args.thresholds, dt_ms=args.dt_ms)
        save_sic_table(table, args.out)
        print(len(table))
        return 0

    cfg = load_experiment_config(args.config).with_overrides(
        seed=args.seed, output_dir=args.out, ablate_astrocyte=args.ablate_astrocyte
    )
    if cfg.experiment != args.command:
        raise ConfigError(f"Config {args.config} describes {cfg.experiment!r}, not {args.command!r}")
    report = run_experiment(cfg, replay=args.replay)
    emit_outputs(report, cfg.output_dir)
    sys.stdout.write(report.to_json())
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging()

    try:
        return _run(args)
    except BrokenPipeError:
        return 0
    except (ConfigError, ValueError) as exc:
        return _error(args.command, exc, 2)
    except (SnanError, OSError) as exc:
        return _error(args.command, exc, 1)


if __name__ == "__main__":
    raise SystemExit(main())
