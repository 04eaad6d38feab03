"""Command-line entry point: ``smheat simulate|analyze|sweep``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import parse_config
from .errors import ConfigError, ConvergenceError
from .runner import default_threads, run_analyze, run_simulate, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=".", help="directory for all outputs (default: .)")
    common.add_argument("--seed", type=int, default=None, help="override run.base_seed")
    common.add_argument("--threads", type=int, default=None,
                        help="parallel ensemble workers (default: $SM_HEAT_THREADS or 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="smheat", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="solve an ensemble and write field CSVs")
    s.add_argument("config")
    a = sub.add_parser("analyze", parents=[common], help="regularity report from field CSVs")
    a.add_argument("config")
    a.add_argument("fields", nargs="*")
    w = sub.add_parser("sweep", parents=[common], help="simulate + analyze along one parameter axis")
    w.add_argument("config")
    w.add_argument("--param", required=True)
    w.add_argument("--values", required=True, help="comma-separated axis values")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        threads = args.threads if args.threads is not None else default_threads()
        if threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.command == "simulate":
            return run_simulate(cfg, args.out_dir, threads)
        if args.command == "analyze":
            return run_analyze(cfg, args.fields, args.out_dir)
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        return run_sweep(cfg, args.param, values, args.out_dir, threads)
    except ConfigError as exc:
        print(f"smheat: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"smheat: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"smheat: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
