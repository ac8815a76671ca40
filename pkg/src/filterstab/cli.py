"""Command-line entry points: spinup, run, sweep, fit, report.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 partial sweep failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from .exceptions import ConfigurationError, FilterStabError
from .harness import (
    ExperimentConfig,
    FILTER_KINDS,
    load_config,
    refit_series,
    report,
    run_single,
    run_sweep,
    truth_initial_state,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4


def _add_common(p):
    p.add_argument("--config", metavar="PATH", help="flat JSON config file")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", metavar="DIR", default=".", help="output directory")
    p.add_argument(
        "--filter", choices=("enkf", "bpf", "both"), default="both",
        help="which filter(s) to run",
    )
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="filterstab",
        description="Filter-stability experiments on the Lorenz-96 system",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("spinup", "generate and store the on-attractor true initial state"),
        ("run", "run a single experiment slice"),
        ("sweep", "run the configured parameter grid"),
        ("fit", "refit stored divergence series"),
        ("report", "regenerate tables from stored results"),
    ):
        _add_common(sub.add_parser(name, help=doc))
    return parser


def _config_from(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, master_seed=args.seed)
    return cfg


def _filters(args):
    return FILTER_KINDS if args.filter == "both" else (args.filter,)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FilterStabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _dispatch(args):
    os.makedirs(args.out, exist_ok=True)
    if args.command == "spinup":
        cfg = _config_from(args)
        x0 = truth_initial_state(cfg)
        path = os.path.join(args.out, "x0_true.csv")
        with open(path, "w", newline="") as fh:
            fh.write(",".join(f"x_{i + 1}" for i in range(len(x0))) + "\n")
            fh.write(",".join(f"{v:.17g}" for v in x0) + "\n")
        print(path)
        return EXIT_OK

    if args.command == "run":
        cfg = _config_from(args)
        slices = [
            run_single(cfg, filter_kind=fk, n_jobs=args.jobs)
            for fk in _filters(args)
        ]
        for p in report(slices, args.out):
            print(p)
        return EXIT_OK

    if args.command == "sweep":
        cfg = _config_from(args)
        result = run_sweep(cfg, filter_kinds=_filters(args), n_jobs=args.jobs)
        if result.slices:
            for p in report(result.slices, args.out):
                print(p)
        for key, message in result.failures:
            print(f"slice {key} failed: {message}", file=sys.stderr)
        if result.failures:
            return EXIT_PARTIAL if result.slices else EXIT_NUMERICAL
        return EXIT_OK

    if args.command == "fit":
        cfg = _config_from(args)
        series_path = os.path.join(args.out, "series.csv")
        records = refit_series(series_path, cfg.fit_start_time)
        fits_path = os.path.join(args.out, "fits.json")
        with open(fits_path, "w") as fh:
            json.dump(_sanitize(records), fh, indent=2)
            fh.write("\n")
        print(fits_path)
        return EXIT_OK

    if args.command == "report":
        series_path = os.path.join(args.out, "series.csv")
        if not os.path.exists(series_path):
            raise ConfigurationError(f"no stored series at {series_path}")
        cfg = _config_from(args)
        records = refit_series(series_path, cfg.fit_start_time)
        tables_path = os.path.join(args.out, "tables.txt")
        with open(tables_path, "w") as fh:
            for axis in ("g", "sigma2"):
                fh.write(f"# fits by {axis}\n")
                fh.write(_format_records(records, axis))
                fh.write("\n")
        print(tables_path)
        return EXIT_OK

    raise ConfigurationError(f"unknown command {args.command!r}")


def _sanitize(records):
    out = []
    for rec in records:
        out.append({
            k: (None if isinstance(v, float) and not np.isfinite(v) else v)
            for k, v in rec.items()
        })
    return out


def _format_records(records, axis):
    values = sorted({rec[axis] for rec in records})
    filters = sorted({rec["filter"] for rec in records})
    by_key = {(rec["filter"], rec[axis]): rec for rec in records}
    lines = [axis + "\t" + "\t".join(f"{v:g}" for v in values)]
    for param, ci_key in (("a", "ci_a"), ("lambda", "ci_lambda"), ("c", "ci_c")):
        for fk in filters:
            cells = []
            for v in values:
                rec = by_key.get((fk, v))
                if rec is None or rec[param] is None or not np.isfinite(rec[param]):
                    cells.append("-")
                else:
                    cells.append(f"{rec[param]:.4g} +/- {rec[ci_key]:.2g}")
            lines.append(f"{param} {fk}\t" + "\t".join(cells))
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    sys.exit(main())
