"""Command-line front end: simulate cohorts, fit the treatment model,
export likelihood-ratio weights, estimate scenario survival with optional
bootstrap bands, emit oracle curves, run the time-change Monte-Carlo check,
and tabulate residual diagnostics.

All outputs are plain CSV with floats printed to 12 significant digits;
identical inputs and seed give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .aalen import (DesignSpec, fit_aalen, martingale_residuals,
                    residual_group_means)
from .acceleration import AccelerationSpec, parse_accel_spec
from .cohort import Cohort, ParseError, read_cohort, write_cohort
from .estimators import (ZeroDenominator, bootstrap_ci, estimate_survival,
                         ratio_matrix)
from .simulate import (DgpConfig, default_config, oracle_survival,
                       simulate_cohort, simulate_hypothetical)
from .timechange import mc_check_intensity
from .weights import DEFAULT_FLOOR


def _fmt(x) -> str:
    return "%.12g" % float(x)


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be start:end:step, got {text!r}")
    start, end, step = (float(p) for p in parts)
    if step <= 0.0 or end < start:
        raise ValueError(f"bad grid range {text!r}")
    count = int((end - start) / step + 1e-9) + 1
    return start + step * np.arange(count)


def _load_cohort(prefix: str) -> Cohort:
    base = prefix + "_baseline.csv"
    if not os.path.exists(base):
        raise FileNotFoundError(f"input file not found: {base}")
    return read_cohort(prefix)


def _load_design(source: str) -> DesignSpec:
    return DesignSpec.parse(source)


def _load_accel(source: str | None) -> AccelerationSpec:
    if source is None:
        return AccelerationSpec.identity()
    return parse_accel_spec(source)


def _load_config(path: str | None) -> DgpConfig:
    if path is None:
        return default_config()
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return DgpConfig.from_json(fh.read()).validate()


def _write_rows(path: str, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_survival(path: str, curve):
    rows = []
    for i, t in enumerate(curve.grid):
        lo = _fmt(curve.lower[i]) if curve.lower is not None else ""
        hi = _fmt(curve.upper[i]) if curve.upper is not None else ""
        rows.append([_fmt(t), _fmt(curve.estimate[i]), lo, hi,
                     curve.scenario_label])
    _write_rows(path, ["time", "estimate", "lower", "upper", "scenario"], rows)


def _cmd_simulate(args) -> None:
    cfg = _load_config(args.config)
    accel = _load_accel(args.accel)
    cohort = (simulate_cohort(cfg, args.n, args.seed) if accel.is_identity()
              else simulate_hypothetical(cfg, accel, args.n, args.seed))
    write_cohort(cohort, args.out)


def _cmd_oracle(args) -> None:
    cfg = _load_config(args.config)
    accel = _load_accel(args.accel)
    cohort = simulate_hypothetical(cfg, accel, args.n, args.seed)
    curve = oracle_survival(cohort, _parse_grid(args.grid))
    curve.scenario_label = accel.describe()
    _write_survival(args.out, curve)


def _cmd_fit_treatment(args) -> None:
    cohort = _load_cohort(args.input)
    design = _load_design(args.design)
    fit = fit_aalen(cohort, design)
    cum = fit.cumulative()
    labels = [t.label() for t in fit.terms]
    rows = []
    for k, t in enumerate(fit.times):
        skip = int(fit.rank_flags[k])
        for j, label in enumerate(labels):
            rows.append([_fmt(t), label, _fmt(fit.increments[k, j]),
                         _fmt(cum[k, j]), skip])
    _write_rows(args.out, ["time", "term", "increment", "cumulative",
                           "rank_skipped"], rows)
    if args.residuals:
        resid = martingale_residuals(cohort, fit, design)
        times = None if args.grid is None else _parse_grid(args.grid)
        table = residual_group_means(cohort, resid, args.strata, times)
        _write_residuals(args.residuals, table)


def _write_residuals(path: str, table) -> None:
    rows = [[_fmt(t), s, "" if np.isnan(m) else _fmt(m)]
            for t, s, m in table.rows()]
    _write_rows(path, ["time", "stratum", "mean"], rows)


def _cmd_residuals(args) -> None:
    cohort = _load_cohort(args.input)
    design = _load_design(args.design)
    fit = fit_aalen(cohort, design)
    resid = martingale_residuals(cohort, fit, design)
    times = None if args.grid is None else _parse_grid(args.grid)
    table = residual_group_means(cohort, resid, args.strata, times)
    _write_residuals(args.out, table)


def _cmd_weights(args) -> None:
    cohort = _load_cohort(args.input)
    design = _load_design(args.design)
    accel = _load_accel(args.accel)
    times, ids, matrix = ratio_matrix(cohort, design, accel,
                                      floor=args.floor)
    rows = []
    for i, sid in enumerate(ids):
        for k, t in enumerate(times):
            rows.append([sid, _fmt(t), _fmt(matrix[k, i])])
    _write_rows(args.out, ["subject_id", "time", "weight"], rows)


def _cmd_estimate(args) -> None:
    cohort = _load_cohort(args.input)
    design = _load_design(args.design)
    accel = _load_accel(args.accel)
    grid = _parse_grid(args.grid)
    if args.bootstrap:
        if args.seed is None:
            raise ValueError("--seed is required with --bootstrap")
        threads = args.threads if args.threads else (os.cpu_count() or 1)
        curve = bootstrap_ci(cohort, design, accel, grid,
                             reps=args.bootstrap, level=args.level,
                             seed=args.seed, floor=args.floor,
                             threads=threads)
    else:
        curve = estimate_survival(cohort, design, accel, grid,
                                  floor=args.floor)
    _write_survival(args.out, curve)


def _cmd_validate_timechange(args) -> None:
    accel = _load_accel(args.accel)
    chk = mc_check_intensity(args.lam, accel, args.horizon, args.paths,
                             args.seed)
    row = chk.row()
    header = list(row)
    _write_rows(args.out, header,
                [[row[h] if isinstance(row[h], (str, int)) else _fmt(row[h])
                  for h in header]])


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="treataccel",
        description="Survival under hypothetical treatment acceleration: "
                    "simulate, fit, weight, estimate.")
    sub = top.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic cohort")
    p.add_argument("--config", help="mechanism config file (JSON)")
    p.add_argument("--accel", help="rate spec (file or inline); default "
                                   "observational")
    p.add_argument("--n", type=int, required=True, help="number of subjects")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True,
                   help="output prefix for _baseline.csv/_events.csv")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("oracle", help="ground-truth survival under a "
                                      "hypothetical rate spec")
    p.add_argument("--config", help="mechanism config file (JSON)")
    p.add_argument("--accel", help="rate spec; default observational")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--grid", required=True, help="start:end:step")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("fit-treatment", help="fit the additive treatment "
                                             "intensity model")
    p.add_argument("--input", required=True, help="cohort prefix")
    p.add_argument("--design", required=True, help="design spec file or text")
    p.add_argument("--out", required=True, help="coefficient table path")
    p.add_argument("--residuals", help="also write residual means here")
    p.add_argument("--strata", default="1",
                   help="stratifying expression for --residuals")
    p.add_argument("--grid", help="residual grid start:end:step "
                                  "(default: pooled event times)")
    p.set_defaults(func=_cmd_fit_treatment)

    p = sub.add_parser("residuals", help="stratified mean residual paths of "
                                         "the fitted treatment model")
    p.add_argument("--input", required=True)
    p.add_argument("--design", required=True)
    p.add_argument("--strata", default="1")
    p.add_argument("--grid", help="start:end:step (default: pooled times)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_residuals)

    p = sub.add_parser("weights", help="likelihood-ratio weight table")
    p.add_argument("--input", required=True)
    p.add_argument("--design", required=True)
    p.add_argument("--accel", required=True)
    p.add_argument("--floor", type=float, default=DEFAULT_FLOOR)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_weights)

    p = sub.add_parser("estimate", help="scenario survival curve, optionally "
                                        "with bootstrap bands")
    p.add_argument("--input", required=True)
    p.add_argument("--design", required=True)
    p.add_argument("--accel", help="rate spec; default observational")
    p.add_argument("--grid", required=True, help="start:end:step")
    p.add_argument("--bootstrap", type=int, default=0,
                   help="number of bootstrap replicates (0 = none)")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int,
                   help="bootstrap workers (default: machine parallelism)")
    p.add_argument("--floor", type=float, default=DEFAULT_FLOOR)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("validate-timechange",
                       help="Monte-Carlo check of the accelerated mean count")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--accel", required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--paths", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_validate_timechange)
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, KeyError, OSError, ParseError,
            ZeroDenominator, RuntimeError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {args.subcommand}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
