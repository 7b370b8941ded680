"""Command-line entry point.

Subcommands: fit, wh-factor, first-passage, price-eds, calibrate, validate,
pipeline.  Exit codes: 0 success, 2 configuration error, 3 numerical failure.
EDSLEVY_WORKERS overrides the day-grid thread count.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .calibration import OptionQuote, calibrate
from .edspricing import DiscountCurve, EdsContract, eds_rate
from .errors import ConfigError, NumericalError
from .hyperexp import fit_exponential_mixture, make_grid
from .inversion import EulerInversionParams, passage_curve
from .levymodel import HyperExpLevyModel
from .mcoracle import SimConfig, simulate_passage, simulate_terminal
from .pipeline import load_config, resolve_config, run_pipeline, write_curve_csv
from .wienerhopf import wh_plus_factor


def _fmt(x):
    return format(float(x), ".17g")


def _workers():
    val = os.environ.get("EDSLEVY_WORKERS")
    if val is None:
        return None
    try:
        return max(1, int(val))
    except ValueError:
        raise ConfigError(f"EDSLEVY_WORKERS must be an integer, got {val!r}")


def _euler_params(args):
    return EulerInversionParams(A=args.euler_a, n_terms=args.n_terms,
                                m_euler=args.m_euler)


def _add_euler_args(sub):
    sub.add_argument("--euler-a", type=float, default=18.4,
                     help="discretization-error control A (default 18.4)")
    sub.add_argument("--n-terms", type=int, default=38)
    sub.add_argument("--m-euler", type=int, default=11)


def cmd_fit(args):
    starts = [float(v) for v in args.starts.split(",")]
    grid = make_grid(args.grid_min, args.grid_max, args.grid_step)
    fit = fit_exponential_mixture(args.y, starts, grid,
                                  terminal_spacing=args.terminal_spacing)
    out = sys.stdout if args.out_csv is None else open(args.out_csv, "w")
    try:
        out.write("index,node,weight\n")
        for i, (u, w) in enumerate(zip(fit.nodes, fit.weights), start=1):
            out.write(f"{i},{_fmt(u)},{_fmt(w)}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    summary = {"residual_norm": fit.residual_norm, "iterations": fit.iterations,
               "max_relative_error": fit.max_relative_error()}
    target = open(args.out_json, "w") if args.out_json else sys.stderr
    try:
        json.dump(summary, target, indent=2, sort_keys=True)
        target.write("\n")
    finally:
        if args.out_json:
            target.close()
    return 0


def cmd_wh_factor(args):
    model = HyperExpLevyModel.load(args.model)
    factor = wh_plus_factor(model, args.a)
    out = sys.stdout if args.out is None else open(args.out, "w")
    try:
        out.write("index,root_re,root_im,coef_re,coef_im\n")
        for i, (r, c) in enumerate(zip(factor.rho, factor.coeffs), start=1):
            out.write(f"{i},{_fmt(r.real)},{_fmt(r.imag)},"
                      f"{_fmt(c.real)},{_fmt(c.imag)}\n")
        out.write(f"atom,{_fmt(factor.atom.real)},{_fmt(factor.atom.imag)},,\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_first_passage(args):
    model = HyperExpLevyModel.load(args.model)
    n_days = int(round(360 * args.years))
    curve = passage_curve(model, args.barrier, n_days, params=_euler_params(args),
                          paper_daycount=not args.grid_daycount, workers=_workers())
    if args.out is None:
        sys.stdout.write("day,t_years,survival,density\n")
        for d, t, s, f in zip(curve.days, curve.t_years, curve.survival, curve.density):
            sys.stdout.write(f"{d},{_fmt(t)},{_fmt(s)},{_fmt(f)}\n")
    else:
        write_curve_csv(args.out, curve)
    return 0


def cmd_price_eds(args):
    model = HyperExpLevyModel.load(args.model)
    contract = EdsContract.with_frequency(args.barrier, args.recovery,
                                          args.maturity_years,
                                          frequency=args.coupon_freq)
    n_days = contract.n_days
    if args.curve_csv:
        discounts = DiscountCurve.from_csv(args.curve_csv, n_days)
    elif args.rate is not None:
        discounts = DiscountCurve.flat(args.rate, n_days)
    else:
        raise ConfigError("provide either --rate or --curve-csv")
    curve = passage_curve(model, args.barrier, n_days, params=_euler_params(args),
                          paper_daycount=not args.grid_daycount, workers=_workers())
    quote = eds_rate(contract, discounts, curve, accrual=args.accrual)
    result = {
        "rate_bp": quote.rate_bp,
        "survival_at_maturity": quote.survival_at_maturity,
        "diagnostics": {
            "rate": quote.rate,
            "protection_leg": quote.protection_leg,
            "coupon_leg_unit": quote.coupon_leg_unit,
            "accrual": quote.accrual,
            "curve_repairs": curve.repairs,
            "barrier": args.barrier,
            "recovery": args.recovery,
            "maturity_years": args.maturity_years,
        },
    }
    json.dump(result, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    if args.curve_out:
        write_curve_csv(args.curve_out, curve)
    return 0


def _read_quotes(path, spot, rate, div_yield):
    quotes = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["strike", "maturity", "price", "type"]
        if reader.fieldnames is None or \
                [f.strip() for f in reader.fieldnames] != expected:
            raise ConfigError("quotes CSV must have header 'strike,maturity,price,type'")
        for row in reader:
            kind = row["type"].strip().lower()
            if kind not in ("call", "put"):
                raise ConfigError(f"quote type must be call or put, got {row['type']!r}")
            quotes.append(OptionQuote(strike=float(row["strike"]),
                                      maturity=float(row["maturity"]),
                                      price=float(row["price"]),
                                      is_call=kind == "call",
                                      spot=spot, rate=rate,
                                      dividend_yield=div_yield))
    return quotes


def cmd_calibrate(args):
    quotes = _read_quotes(args.quotes_csv, args.spot, args.rate, args.div_yield)
    init = tuple(float(v) for v in args.init.split(","))
    if len(init) != 3:
        raise ConfigError("--init must be C,G,M")
    band = None if args.no_maturity_band else (args.band_min, args.band_max)
    result = calibrate(quotes, args.y, init, maturity_band=band)
    out = {
        "c": result.params.c, "g": result.params.g, "m": result.params.m,
        "y": result.params.y, "rmse": result.rmse,
        "iterations": result.iterations,
        "residuals": [float(r) for r in result.residuals],
    }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def cmd_validate(args):
    cfg = resolve_config({"mc": {"paths": args.paths, "seed": args.seed,
                                 "dt": args.dt, "partitions": args.partitions}})
    result, curve, model = run_pipeline({k: v for k, v in cfg.items() if k != "mc"},
                                        workers=_workers())
    sim = SimConfig(paths=args.paths, seed=args.seed, dt=args.dt,
                    partitions=args.partitions)
    checks = []

    horizon = 1.0
    est = simulate_passage(model, cfg["contract"]["barrier"], horizon, sim)
    analytic = 1.0 - curve.survival[int(360 * horizon) - 1]
    tol = 3.0 * est.std_error + 0.005
    checks.append(("passage_prob_1y", abs(est.probability - analytic), tol))

    r = cfg["rates"]["rate"] - cfg["rates"]["dividend_yield"]
    xt = simulate_terminal(model, horizon, sim)
    growth = np.exp(xt)
    se = growth.std(ddof=1) / np.sqrt(len(growth))
    checks.append(("martingale_1y", abs(growth.mean() - np.exp(r * horizon)), 3.0 * se))

    width = max(len(name) for name, _, _ in checks)
    failed = 0
    for name, err, tol in checks:
        ok = err <= tol
        failed += not ok
        print(f"{name:<{width}}  error={err:.6g}  tol={tol:.6g}  "
              f"{'PASS' if ok else 'FAIL'}")
    if failed:
        raise NumericalError(f"{failed} validation check(s) failed")
    return 0


def cmd_pipeline(args):
    config = load_config(args.config) if args.config else resolve_config()
    result, _, _ = run_pipeline(config, out_dir=args.out, workers=_workers())
    if args.out is None:
        json.dump(result["eds_rates"], sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="edslevy",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the exponential mixture to the jump kernel")
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--starts", required=True, help="comma-separated starting nodes")
    p.add_argument("--grid-min", type=float, default=0.25)
    p.add_argument("--grid-max", type=float, default=5.0)
    p.add_argument("--grid-step", type=float, default=0.025)
    p.add_argument("--terminal-spacing", type=float, default=None)
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-json", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("wh-factor", help="roots/coefficients of the positive factor")
    p.add_argument("--model", required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_wh_factor)

    p = sub.add_parser("first-passage", help="daily survival and passage density")
    p.add_argument("--model", required=True)
    p.add_argument("--barrier", type=float, required=True)
    p.add_argument("--years", type=float, required=True)
    p.add_argument("--grid-daycount", action="store_true",
                   help="use density/360 instead of the source density/365")
    _add_euler_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_first_passage)

    p = sub.add_parser("price-eds", help="equity default swap rate")
    p.add_argument("--model", required=True)
    p.add_argument("--barrier", type=float, required=True)
    p.add_argument("--recovery", type=float, required=True)
    p.add_argument("--maturity-years", type=float, required=True)
    p.add_argument("--coupon-freq", default="quarterly",
                   choices=("monthly", "quarterly", "semiannual", "annual"))
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--curve-csv", default=None)
    p.add_argument("--accrual", default="printed",
                   choices=("printed", "since_last_coupon"))
    p.add_argument("--grid-daycount", action="store_true")
    _add_euler_args(p)
    p.add_argument("--curve-out", default=None)
    p.set_defaults(func=cmd_price_eds)

    p = sub.add_parser("calibrate", help="fit C,G,M to option quotes")
    p.add_argument("--quotes-csv", required=True)
    p.add_argument("--y", type=float, default=0.5)
    p.add_argument("--spot", type=float, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--div-yield", type=float, default=0.0)
    p.add_argument("--init", required=True, help="initial C,G,M")
    p.add_argument("--band-min", type=float, default=1.0)
    p.add_argument("--band-max", type=float, default=2.0)
    p.add_argument("--no-maturity-band", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("validate", help="Monte Carlo cross-checks")
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=20240)
    p.add_argument("--dt", type=float, default=1.0 / 3600.0)
    p.add_argument("--partitions", type=int, default=8)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("pipeline", help="full run from a config file")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
