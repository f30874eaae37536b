"""Command-line front end.

Subcommands: solve, bench run, bench fit, effdim, validate-moments.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import effdim, harness, problems, solvers
from .solvers import PAPER_C_STEP


def _add_common(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--paper-constants", action="store_true",
                   help="use the analysis constants (heavy-ball step 1/(14400 ED)^2, "
                        "lemma-derived cubic tolerances) instead of practical defaults")
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--quiet", action="store_true")


def _emit(args, payload):
    if not args.quiet:
        print(json.dumps(payload, indent=2, default=str))


def cmd_solve(args) -> int:
    cell = dict(harness._DEFAULTS)
    cell["problem.kind"] = args.problem
    cell["problem.d"] = args.d
    cell["problem.spectrum"] = args.spectrum
    cell["solver.name"] = args.solver
    cell["solver.target_gap"] = args.target_gap
    cell["base_seed"] = args.seed if args.seed is not None else 0
    cell["x0.mode"] = args.x0_mode
    cell["x0.norm"] = args.x0_norm
    if args.max_iters is not None:
        cell["solver.max_iters"] = args.max_iters
    if args.paper_constants:
        cell["solver.c_step"] = PAPER_C_STEP
    row = harness.run_cell(cell, 0)
    _emit(args, row)
    return 0 if row["status"] in ("TargetReached", "MaxIters") else 1


def cmd_bench_run(args) -> int:
    cfg = harness.load_config(args.config)
    if args.seed is not None:
        cfg["base_seed"] = args.seed
    if args.max_iters is not None:
        cfg["solver.max_iters"] = args.max_iters
    if args.paper_constants:
        cfg["solver.c_step"] = PAPER_C_STEP
    rows = harness.run_experiment(cfg)
    harness.write_csv(rows, args.out)
    if not args.quiet:
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_bench_fit(args) -> int:
    rows = harness.read_csv(args.infile)
    report = harness.fit_scaling(rows, args.axis)
    _emit(args, {"axis": report.axis, "slope": report.slope,
                 "stderr": report.stderr, "cells": report.cells})
    return 0


def cmd_effdim(args) -> int:
    spec = args.spectrum
    if spec.endswith(".csv") and ":" not in spec:
        eigs = problems.load_spectrum_csv(spec)
    else:
        parsed = harness.parse_spectrum(spec)
        if args.d is None:
            print("--d required for parametric spectra", file=sys.stderr)
            return 2
        eigs = parsed.realize(args.d)
    report = {"alpha": args.alpha, "d": int(eigs.size),
              "ed_exact": effdim.ed_exact(eigs, args.alpha)}
    _emit(args, report)
    return 0


def cmd_validate_moments(args) -> int:
    checks = harness.validate_moments(args.d, args.n, args.seed or 0)
    _emit(args, checks)
    ok = all(c["passed"] or c["insufficient_precision"] for c in checks)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zodim")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run a single solver on a fixture")
    p.add_argument("--problem", default="quadratic",
                   choices=["quadratic", "quartic", "nonconvex"])
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--spectrum", default="flat:1.0")
    p.add_argument("--solver", default="rg",
                   choices=["rg", "zhb", "zhb_reg", "anpe", "cubic"])
    p.add_argument("--target-gap", type=float, default=0.01,
                   help="relative to the initial gap")
    p.add_argument("--x0-mode", default="gaussian",
                   choices=["gaussian", "top_eig", "balanced", "zero"])
    p.add_argument("--x0-norm", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    bench = sub.add_parser("bench", help="batch experiments")
    bsub = bench.add_subparsers(dest="bench_command", required=True)
    p = bsub.add_parser("run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_bench_run)
    p = bsub.add_parser("fit")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--axis", required=True,
                   choices=["d", "ed_half", "inv_mu_sqrt", "tr_over_mu"])
    _add_common(p)
    p.set_defaults(func=cmd_bench_fit)

    p = sub.add_parser("effdim", help="effective dimension of a spectrum")
    p.add_argument("--spectrum", required=True,
                   help="kind:params (e.g. powerlaw:1,3) or a CSV path")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--d", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_effdim)

    p = sub.add_parser("validate-moments", help="Monte Carlo estimator checks")
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--n", type=int, default=200_000)
    _add_common(p)
    p.set_defaults(func=cmd_validate_moments)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
