"""Command-line interface.

Exit codes: 0 on success, 2 on usage/configuration errors, 3 on numeric or
degenerate-data failures.  Every randomized command echoes its effective
seed on standard error so any run can be re-created.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from dataclasses import replace

import numpy as np

from . import dataio, geom, limits, mc, model, sampling, specfn, stats, zones
from .errors import (ConfigError, DegenerateDenominator, DegenerateMean,
                     DomainError, NoConvergence, NormalizationError,
                     ParseError, SphereModeError, TargetUnreachable,
                     UnsupportedDimension, UnsupportedRegime, ZeroVector)
from .model import Regime

_USAGE_ERRORS = (ConfigError, ParseError, DomainError, TargetUnreachable,
                 UnsupportedDimension, UnsupportedRegime)
_NUMERIC_ERRORS = (NoConvergence, DegenerateMean, DegenerateDenominator,
                   NormalizationError, ZeroVector)

_REGIMES = {"away": Regime.AWAY_FROM_UNIFORMITY,
            "beyond": Regime.BEYOND_CONTIGUITY,
            "contiguity": Regime.UNDER_CONTIGUITY,
            "strict": Regime.STRICT_CONTIGUITY}


def _echo_seed(seed):
    print(f"seed: {seed}", file=sys.stderr)


def _load_sample(args) -> stats.Sample:
    spec = dataio.DatasetSpec(path=args.data, format=args.format, p=args.p)
    return dataio.load_sample(spec)


def _parse_theta0(text, p):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != p:
        raise ConfigError(f"theta0 needs {p} comma-separated coordinates",
                          key="theta0")
    return geom.normalize(np.asarray(parts))


def _parse_law(text) -> limits.LimitLaw:
    fields = text.split(":")
    kind = fields[0]
    try:
        if kind == "chisq":
            return limits.ChiSquare(int(fields[1]))
        if kind == "ncchisq":
            return limits.NoncentralChiSquare(int(fields[1]), float(fields[2]))
        if kind == "waldmix":
            return limits.WaldMixture(int(fields[1]), float(fields[2]))
        if kind == "projnormal":
            return limits.ProjectedNormal(int(fields[1]), float(fields[2]))
        if kind == "uniform":
            return limits.UniformSphere(int(fields[1]))
    except (IndexError, ValueError):
        raise ConfigError(f"malformed law descriptor {text!r}", key="law") from None
    raise ConfigError(f"unknown law kind {kind!r}", key="law")


def _render_alongside(kind, csv_path, palette="watson"):
    """Render a figure next to a CSV via the optional spheremode-figs package."""
    try:
        import spheremode_figs
    except ImportError:
        raise ConfigError(
            "--render requires the spheremode-figs package; install it or "
            "render the CSV separately", key="render") from None
    out = str(Path(csv_path).with_suffix(".png"))
    spheremode_figs.render(spheremode_figs.FigureRequest(
        csv_path=str(csv_path), kind=kind, out_path=out, palette=palette))
    print(f"rendered {out}")


def cmd_simulate(args) -> int:
    if args.config:
        spec = dataio.load_experiment(args.config)
    else:
        spec = mc.preset_spec(args.figure)
    overrides = {"workers": args.workers}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.fast:
        overrides["M"] = 2000
    spec = replace(spec, **overrides)
    if args.config and spec.figure != args.figure:
        raise ConfigError(
            f"config selects figure {spec.figure!r} but the command line "
            f"asks for {args.figure!r}", key="figure")
    _echo_seed(spec.seed)
    result = mc.run_experiment(spec)
    result.write_csv(args.out)
    print(f"wrote {len(result.rows)} rows to {args.out}")
    if args.render:
        if spec.figure == "thm21":
            raise ConfigError("--render supports fig1, fig2 and fig3 only",
                              key="render")
        _render_alongside(spec.figure, args.out)
    return 0


def cmd_test(args) -> int:
    sample = _load_sample(args)
    theta0 = _parse_theta0(args.theta0, sample.p)
    statistic = (stats.watson_statistic(sample, theta0) if args.test == "watson"
                 else stats.wald_statistic(sample, theta0))
    outcome = stats.decide(statistic, limits.ChiSquare(sample.p - 1),
                           args.alpha, test_name=args.test)
    print(f"test: {outcome.test_name}")
    print(f"statistic: {outcome.statistic:.6g}")
    print(f"critical_value: {outcome.critical_value:.6g}")
    if outcome.p_value is not None:
        print(f"p_value: {outcome.p_value:.6g}")
    print(f"reject_at_{outcome.alpha:g}: {str(outcome.reject).lower()}")
    return 0


def cmd_zone(args) -> int:
    sample = _load_sample(args)
    if sample.p != 3:
        raise ConfigError("zone export requires p = 3 data", key="data")
    if args.resolution < 1000:
        print(f"warning: resolution {args.resolution} is coarse; zone "
              "boundaries will be ragged", file=sys.stderr)
    zone = zones.invert_test(sample, args.test, level=args.level,
                             resolution=args.resolution)
    zones.write_zone_csv(zone, args.out)
    print(f"test: {args.test}")
    print(f"area_fraction: {zones.zone_area_fraction(zone):.6g}")
    print(f"components: {len(zone.components)}")
    print(f"wrote zone grid to {args.out}")
    if args.render:
        _render_alongside("zone", args.out, palette=args.test)
    return 0


def cmd_calibrate(args) -> int:
    radial = model.radial_function(args.radial)
    if args.e1 is not None:
        target = args.e1
    else:
        try:
            rate, n_text = args.regime.split(",")
            ell, denom = rate.split("/")
            target = int(n_text) ** (-int(ell) / int(denom)) / args.p ** 0.5
        except (ValueError, ZeroDivisionError):
            raise ConfigError(
                "regime must look like 'ell/denominator,n' (e.g. 2/4,200)",
                key="regime") from None
    kappa = model.calibrate_kappa(args.p, radial, target)
    theta = np.zeros(args.p)
    theta[-1] = 1.0
    mom = model.moments(model.RotSymModel(theta, kappa, radial))
    print(f"kappa: {kappa:.6g}")
    print(f"e1: {mom.e1:.6g}")
    print(f"e2_tilde: {mom.e2_tilde:.6g}")
    print(f"d: {mom.d:.6g}")
    return 0


def cmd_power(args) -> int:
    kind = _REGIMES[args.regime]
    try:
        lo, hi, step = (float(v) for v in args.tau_grid.split(":"))
    except ValueError:
        raise ConfigError("tau-grid must look like start:stop:step",
                          key="tau-grid") from None
    taus = np.arange(lo, hi + step / 2, step)
    tests = ["watson", "oracle"] if args.test == "both" else [args.test]
    print("tau," + ",".join(tests))
    for tau in taus:
        powers = [limits.asymptotic_power(t, kind, args.xi, float(tau), args.p,
                                          args.e2_tilde, args.alpha)
                  for t in tests]
        print(f"{tau:.6g}," + ",".join(f"{p:.6g}" for p in powers))
    return 0


def cmd_limits_quantile(args) -> int:
    law = _parse_law(args.law)
    cache = limits.QuantileCache(args.cache) if args.cache else None
    rng = None
    if args.seed is not None:
        rng = sampling.derive_stream(args.seed, [0])
        _echo_seed(args.seed)
    else:
        _echo_seed(sampling.DEFAULT_MASTER_SEED)
    value = limits.critical_value(law, args.alpha, rng=rng, m=args.m, cache=cache)
    print(f"{value:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spheremode",
        description="Tests, Monte-Carlo studies and confidence zones for the "
                    "modal location of directional data.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a figure-style Monte-Carlo study")
    sim.add_argument("--figure", required=True,
                     choices=["fig1", "fig2", "fig3", "thm21"],
                     help="which preset experiment to run")
    sim.add_argument("--config", help="key=value config file overriding the preset")
    sim.add_argument("--seed", type=int, default=None,
                     help=f"master seed (default {sampling.DEFAULT_MASTER_SEED})")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                     help="worker processes (default: available cores)")
    sim.add_argument("--fast", action="store_true",
                     help="drop to M=2000 replicates for a quick pass")
    sim.add_argument("--render", action="store_true",
                     help="also render a figure next to the CSV "
                          "(needs spheremode-figs)")
    sim.set_defaults(func=cmd_simulate)

    tst = sub.add_parser("test", help="run one location test on a data file")
    tst.add_argument("--data", required=True, help="CSV data file")
    tst.add_argument("--format", choices=list(dataio.FORMATS), default="cartesian",
                     help="data layout (default cartesian)")
    tst.add_argument("--p", type=int, default=3, help="ambient dimension (default 3)")
    tst.add_argument("--theta0", required=True,
                     help="null location, e.g. '0,0,1' (normalized on input)")
    tst.add_argument("--test", choices=["watson", "wald"], default="watson",
                     help="test statistic (default watson)")
    tst.add_argument("--alpha", type=float, default=0.05,
                     help="test level (default 0.05)")
    tst.set_defaults(func=cmd_test)

    zon = sub.add_parser("zone", help="invert a test into a confidence zone")
    zon.add_argument("--data", required=True, help="CSV data file (p = 3)")
    zon.add_argument("--format", choices=list(dataio.FORMATS), default="cartesian",
                     help="data layout (default cartesian)")
    zon.add_argument("--p", type=int, default=3, help="ambient dimension (must be 3)")
    zon.add_argument("--test", choices=["watson", "wald"], default="watson",
                     help="test to invert (default watson)")
    zon.add_argument("--level", type=float, default=0.95,
                     help="confidence level (default 0.95)")
    zon.add_argument("--resolution", type=int, default=20000,
                     help="grid size (default 20000)")
    zon.add_argument("--out", required=True, help="output zone CSV path")
    zon.add_argument("--render", action="store_true",
                     help="also render the zone projection next to the CSV "
                          "(needs spheremode-figs)")
    zon.set_defaults(func=cmd_zone)

    cal = sub.add_parser("calibrate", help="solve for the concentration kappa")
    cal.add_argument("--p", type=int, default=3, help="ambient dimension (default 3)")
    cal.add_argument("--radial", default="fvml",
                     help="radial function name (fvml, linear, logistic)")
    group = cal.add_mutually_exclusive_group(required=True)
    group.add_argument("--e1", type=float, help="target mean cosine")
    group.add_argument("--regime",
                       help="target as 'ell/denominator,n' giving e1 = "
                            "n^(-ell/denominator)/sqrt(p)")
    cal.set_defaults(func=cmd_calibrate)

    pow_ = sub.add_parser("power", help="print asymptotic power curves")
    pow_.add_argument("--regime", required=True, choices=sorted(_REGIMES),
                      help="asymptotic regime")
    pow_.add_argument("--xi", type=float, default=1.0,
                      help="locality parameter (default 1)")
    pow_.add_argument("--p", type=int, default=3, help="ambient dimension (default 3)")
    pow_.add_argument("--alpha", type=float, default=0.05,
                      help="test level (default 0.05)")
    pow_.add_argument("--tau-grid", default="0:2:0.1",
                      help="perturbation norms as start:stop:step (default 0:2:0.1)")
    pow_.add_argument("--e2-tilde", type=float, default=None,
                      help="cosine variance (required for the away regime)")
    pow_.add_argument("--test", choices=["watson", "oracle", "both"],
                      default="watson", help="which power curve (default watson)")
    pow_.set_defaults(func=cmd_power)

    lq = sub.add_parser("limits-quantile",
                        help="alpha-upper quantile of a limit law")
    lq.add_argument("--law", required=True,
                    help="descriptor: chisq:DF | ncchisq:DF:NC | waldmix:DF:LAM "
                         "| projnormal:P:XI | uniform:P")
    lq.add_argument("--alpha", type=float, default=0.05,
                    help="upper-tail probability (default 0.05)")
    lq.add_argument("--m", type=int, default=limits.MC_QUANTILE_DRAWS,
                    help="Monte-Carlo draws (default 1000000)")
    lq.add_argument("--seed", type=int, default=None,
                    help="master seed for the Monte-Carlo quantile")
    lq.add_argument("--cache", help="path of the on-disk quantile cache")
    lq.set_defaults(func=cmd_limits_quantile)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERIC_ERRORS as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except SphereModeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
