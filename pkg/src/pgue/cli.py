"""Command-line entry point: ``pgue <subcommand> [--config PATH] [--key value ...]``.

Exit codes: 0 success, 2 configuration error, 3 numeric or precision
failure, 4 acceptance-threshold breach (with ``--assert``).
"""
import argparse
import sys

import numpy as np

from . import experiments as ex
from .lax import PathError
from .orthopoly import PrecisionError, ResourceError
from .painleve import InitializationError, IntegrationError, MatchingError
from .psi import AccuracyError, ConsistencyError
from .scaling import DomainError

NUMERIC_ERRORS = (PrecisionError, ResourceError, IntegrationError, MatchingError,
                  InitializationError, AccuracyError, ConsistencyError, PathError,
                  DomainError, ArithmeticError)

SUBCOMMANDS = ex.EXPERIMENTS + ("painleve-solve", "recurrence")


def _strictly_decreasing(vals):
    return all(b < a for a, b in zip(vals, vals[1:]))


def check(cfg, rows):
    """Acceptance checks for ``--assert``; returns a list of failure messages."""
    fails = []
    if cfg.experiment == "kernel-limit":
        e = ex.grid_max_errors(rows)
        ns = sorted(e)
        if not _strictly_decreasing([e[n] for n in ns]):
            fails.append(f"e_n not strictly decreasing: {e}")
        if len(ns) > 1:
            bound = 1.5 * (ns[-1] / ns[0]) ** (-1 / 3)
            if e[ns[-1]] / e[ns[0]] > bound:
                fails.append(f"e ratio {e[ns[-1]] / e[ns[0]]:.3f} > {bound:.3f}")
    elif cfg.experiment == "partition-limit":
        r = sorted((int(x.labels["n"]), x.abs_error) for x in rows)
        if not _strictly_decreasing([v for _, v in r]):
            fails.append(f"r_n not strictly decreasing: {r}")
    elif cfg.experiment == "identities":
        for x in rows:
            tol = 1e-8 if x.labels["v"] == 1 else 1e-6
            if x.meta["relative_error"] >= tol:
                fails.append(f"identity {x.labels['v']} at lam={x.labels['u']}: "
                             f"{x.meta['relative_error']:.2e}")
    elif cfg.experiment == "outer-partition":
        q = ex.outer_ratios(rows)
        if max(q.values()) > 2 * min(q.values()):
            fails.append(f"scaled errors spread more than a factor 2: {q}")
    elif cfg.experiment == "b1-crosscheck":
        by_s = {}
        for x in rows:
            by_s.setdefault(float(x.labels["s"]), []).append((int(x.labels["n"]), x.abs_error))
        for s, lst in by_s.items():
            lst.sort()
            if max(v for _, v in lst) >= 0.15:
                fails.append(f"|b1 difference| >= 0.15 at s={s}: {lst}")
            if not _strictly_decreasing([v for _, v in lst]):
                fails.append(f"b1 difference not shrinking in n at s={s}: {lst}")
    return fails


def build_parser():
    p = argparse.ArgumentParser(prog="pgue", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--out", help="output CSV path (default stdout)")
    p.add_argument("--precision", dest="precision_bits", help="working precision in bits")
    p.add_argument("--rtol", help="relative tolerance")
    p.add_argument("--assert", dest="do_assert", action="store_true",
                   help="exit with code 4 if an acceptance threshold is breached")
    for key in ex.ExperimentConfig.keys():
        if key in ("precision_bits", "rtol", "experiment", "output_path"):
            continue
        p.add_argument(f"--{key}", dest=key, help=f"override config key {key}")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ex.ExperimentConfig.keys()
                 if k not in ("experiment", "output_path") and hasattr(args, k)}
    if args.command in ex.EXPERIMENTS:
        overrides["experiment"] = args.command
    overrides["output_path"] = args.out
    try:
        if args.config:
            cfg = ex.ExperimentConfig.from_file(args.config, **overrides)
        else:
            cfg = ex.ExperimentConfig.from_text("", **overrides)
    except (ex.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "painleve-solve":
            text, rows = ex.table_to_csv(*ex.painleve_table(cfg)), None
        elif args.command == "recurrence":
            text, rows = ex.table_to_csv(*ex.recurrence_rows(cfg)), None
        else:
            rows = ex.run(cfg)
            text = ex.rows_to_csv(rows)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    if cfg.output_path:
        with open(cfg.output_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.do_assert and rows is not None:
        fails = check(cfg, rows)
        for f in fails:
            print(f"FAIL: {f}", file=sys.stderr)
        if fails:
            return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
