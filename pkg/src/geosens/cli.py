"""Command-line entry point: ``geosens <experiment> --config PATH [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 degenerate denominator.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile

from .config import EXPERIMENTS, load_config
from .errors import ConfigError, DegenerateDenominator, GeosensError, InvalidNu, TooFewSamples
from .experiments import run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_DEGENERATE = 4

log = logging.getLogger("geosens")


def build_parser() -> argparse.ArgumentParser:
    # argparse exits with 2 on usage errors, which matches the config-error code
    parser = argparse.ArgumentParser(prog="geosens", description="Geodesic-ball sensitivity indices for manifold-valued outputs.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="64-bit seed (overrides the file)")
    parser.add_argument("--n", type=int, help="number of pick-freeze pairs")
    parser.add_argument("--nw", type=int, help="size of the pool indexing the balls")
    parser.add_argument("--mode", help="exact or incomplete:M")
    parser.add_argument("--bootstrap", type=int, metavar="REPS", help="bootstrap replicates (0 disables)")
    parser.add_argument("--out", help="output path (stdout when omitted)")
    parser.add_argument("--format", choices=("csv", "json"))
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    # write to a sibling temp file first so a failed run never leaves a partial table
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".geosens-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {
        "experiment": args.experiment,
        "seed": args.seed,
        "n": args.n,
        "nw": args.nw,
        "mode": args.mode,
        "bootstrap": args.bootstrap,
        "output": args.out,
        "format": args.format,
    }
    try:
        cfg = load_config(args.config, overrides)
        log.info("running %s with seed %d, N=%d, Nw=%d, mode %s", cfg.experiment, cfg.seed, cfg.n, cfg.n_w, cfg.mode)
        table = run(cfg)
        _write(table.render(cfg.format), cfg.output)
    except (ConfigError, InvalidNu, TooFewSamples) as exc:
        print(f"geosens: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateDenominator as exc:
        print(f"geosens: degenerate denominator: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (GeosensError, ArithmeticError) as exc:
        print(f"geosens: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # model constructors reject bad parameters with ValueError
        print(f"geosens: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
