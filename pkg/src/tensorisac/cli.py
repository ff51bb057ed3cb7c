"""Command-line entry point: run sweeps, check configs, emit plot data.

Subcommands
-----------
``run --config <file> [--out <dir>] [--trials N] [--seed S] [--noiseless]``
    Run the configured Monte Carlo sweep and write ``results.csv`` plus
    ``summary.csv``.  ``--trials``/``--seed`` override the config file;
    ``--noiseless`` replaces the noise level with the exact sentinel
    (an ``es_n0`` sweep collapses to a single noiseless point).
``check --config <file>``
    Validate the config, including the identifiability inequalities for
    every sweep point, without running anything.
``plotdata --csv <file> [--out <dir>]``
    Re-aggregate a ``results.csv`` into per-metric two-column text files.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .exceptions import ConfigError
from .harness import emit_plot_data, load_config, run_sweep


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tensorisac",
        description="Monte Carlo driver for tensor-based sensing and communication receivers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the configured sweep and write CSV artifacts")
    p_run.add_argument("--config", required=True, help="experiment config (JSON)")
    p_run.add_argument("--out", default=None, help="output directory (default: from config)")
    p_run.add_argument("--trials", type=int, default=None, help="override trials per sweep point")
    p_run.add_argument("--seed", type=int, default=None, help="override the base seed")
    p_run.add_argument("--noiseless", action="store_true", help="disable noise (exact-recovery mode)")

    p_check = sub.add_parser("check", help="validate a config without running")
    p_check.add_argument("--config", required=True, help="experiment config (JSON)")

    p_plot = sub.add_parser("plotdata", help="write per-metric plot files from a results CSV")
    p_plot.add_argument("--csv", required=True, help="results.csv produced by `run`")
    p_plot.add_argument("--out", default=None, help="output directory (default: next to the CSV)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            if args.trials is not None:
                cfg = replace(cfg, trials=args.trials)
            if args.seed is not None:
                cfg = replace(cfg, base_seed=args.seed)
            if args.noiseless:
                if cfg.sweep_variable == "es_n0":
                    cfg = replace(cfg, sweep_values=[float("inf")])
                else:
                    cfg = replace(cfg, es_n0_db=float("inf"))
            cfg.validate()
            results_path, summary_path = run_sweep(cfg, out_dir=args.out)
            print(results_path)
            print(summary_path)
        elif args.command == "check":
            load_config(args.config)
            print("config ok")
        elif args.command == "plotdata":
            for path in emit_plot_data(args.csv, out_dir=args.out):
                print(path)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
