"""Command-line front end.

Exit codes: 0 success/pass, 1 verification failed, 2 usage or regime error,
3 step limit exceeded, 4 non-finite state, 5 stopped on an energy event.
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import __version__
from .analysis import (
    IntegrationError,
    bound_exponents,
    bound_ratios,
    estimate_blowup,
    fit_decay_exponent,
    random_ics,
    scale_ics,
    sweep_initial_scale,
)
from .integrator import Direction, IntegratorConfig, Status, integrate
from .io import read_trajectory, report, trajectory_csv, trajectory_results, write_atomic
from .lyapunov import DEFAULT_SEED
from .model import ModelParams, Regime, RegimeError, classify_regime, crossover_alpha

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
STATUS_EXIT = {
    Status.COMPLETED: EXIT_OK,
    Status.STEP_LIMIT_EXCEEDED: 3,
    Status.NON_FINITE: 4,
    Status.EVENT_STOPPED: 5,
}
EXIT_INTEGRATOR = 3


class UsageError(Exception):
    pass


def parse_scales(text: str) -> list[float]:
    """``"1e0..1e10"`` (one per decade), ``"1e0..1e10:0.5"`` (step in decades)
    or a comma-separated list."""
    if ".." in text:
        span, _, step = text.partition(":")
        lo, hi = (float(x) for x in span.split(".."))
        step = float(step) if step else 1.0
        if not (0 < lo <= hi and step > 0):
            raise argparse.ArgumentTypeError(f"bad scale range {text!r}")
        a, b = math.log10(lo), math.log10(hi)
        n = int(round((b - a) / step)) + 1
        return [float(10.0 ** (a + i * step)) for i in range(n)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _emit(args, text: str) -> None:
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _resolved(args, **overrides) -> dict:
    # the output path does not affect results, so it is left out
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    cfg.update(overrides)
    return cfg


def _params(args) -> ModelParams:
    try:
        return ModelParams(args.alpha, args.beta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    params = _params(args)
    if args.t1 == args.t0:
        raise UsageError("t1 must differ from t0")
    direction = Direction.FORWARD if args.t1 > args.t0 else Direction.BACKWARD
    try:
        cfg = IntegratorConfig(rel_tol=args.rtol, abs_tol=args.atol, h_max=args.h_max,
                               max_steps=args.max_steps, direction=direction)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    traj = integrate(params, (args.u0, args.v0), args.t0, args.t1, cfg,
                     energy_threshold=args.threshold)
    if args.format == "csv":
        _emit(args, trajectory_csv(traj))
    else:
        config = _resolved(args, direction=direction.name)
        _emit(args, report(config, trajectory_results(traj),
                           {"status": traj.status.value,
                            "completed": traj.status is Status.COMPLETED}))
    return STATUS_EXIT[traj.status]


def cmd_fit(args) -> int:
    traj = read_trajectory(args.input)
    try:
        fit = fit_decay_exponent(traj, args.tmin, args.tmax, args.npoints)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    verdict = {"pass": True}
    if args.expect_slope is not None:
        rel = abs(fit.slope - args.expect_slope) / abs(args.expect_slope)
        verdict = {"expected_slope": args.expect_slope, "relative_error": rel,
                   "tolerance": args.tol, "pass": rel <= args.tol}
    _emit(args, report(_resolved(args), fit, verdict))
    return EXIT_OK if verdict["pass"] else EXIT_FAIL


def cmd_verify_bound(args) -> int:
    params = _params(args)
    params.require_bounded_regime()
    spec = bound_exponents(params)
    cfg = IntegratorConfig(rel_tol=args.rtol, abs_tol=args.atol)
    grid = np.geomspace(args.grid_min, args.grid_max, args.grid_points)
    scales = args.scales
    lo, hi = min(scales), max(scales)
    est = scale_ics(params, scales)
    n_half = 2 * (len(scales) - 1) + 1 if len(scales) > 1 else 1
    doubled = scale_ics(params, np.geomspace(lo, hi, n_half)) if len(scales) > 1 else est * 2
    oos = random_ics(params, args.n_oos, lo, hi, args.seed)

    r_est = bound_ratios(params, est, grid, cfg)
    r_dbl = bound_ratios(params, doubled, grid, cfg)
    r_oos = bound_ratios(params, oos, grid, cfg)
    c_emp = float(r_est.max())
    c_dbl = float(r_dbl.max())
    change = abs(c_dbl - c_emp) / c_emp if c_emp > 0 else 0.0
    oos_worst = r_oos.max(axis=1)
    oos_ok = bool(np.all(oos_worst <= args.oos_factor * c_emp))
    stable = change <= args.stability_tol
    results = {
        "regime": classify_regime(params).value,
        "e_fast": spec.e_fast,
        "e_slow": spec.e_slow,
        "c_emp": c_emp,
        "c_emp_doubled": c_dbl,
        "c_emp_relative_change": change,
        "estimation_set": [{"ic": list(ic), "worst_ratio": float(w)}
                           for ic, w in zip(est, r_est.max(axis=1))],
        "out_of_sample": [{"ic": list(ic), "worst_ratio": float(w)}
                          for ic, w in zip(oos, oos_worst)],
    }
    verdict = {"out_of_sample_bounded": oos_ok, "c_emp_stable": stable,
               "pass": oos_ok and stable}
    _emit(args, report(_resolved(args, scales=scales), results, verdict))
    return EXIT_OK if verdict["pass"] else EXIT_FAIL


def cmd_sweep(args) -> int:
    params = _params(args)
    cfg = IntegratorConfig(rel_tol=args.rtol, abs_tol=args.atol)
    rep = sweep_initial_scale(params, args.tstar, args.scales, cfg,
                              ic_mode=args.ic_mode, seed=args.seed)
    saturated = rep.saturation_ratio <= args.max_ratio
    verdict = {"max_ratio": args.max_ratio, "saturated": saturated, "pass": saturated}
    results = {"regime": classify_regime(params).value, **vars(rep)}
    _emit(args, report(_resolved(args), results, verdict))
    return EXIT_OK if saturated else EXIT_FAIL


def cmd_blowup(args) -> int:
    params = _params(args)
    params.require_bounded_regime()
    cfg = IntegratorConfig(rel_tol=args.rtol, abs_tol=args.atol,
                           max_steps=args.max_steps, direction=Direction.BACKWARD)
    try:
        rep = estimate_blowup(params, (args.u0, args.v0), args.threshold, cfg,
                              decades=args.decades)
    except IntegrationError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    spec = bound_exponents(params)
    expected = -max(spec.e_fast, spec.e_slow)
    rel = abs(rep.rate_fit.slope - expected) / abs(expected)
    regime = classify_regime(params)
    # Generic backward solutions attain the t -> 0 exponent only below the crossover.
    gating = regime is Regime.SUB_CRITICAL
    verdict = {"expected_slope": expected, "relative_error": rel, "tolerance": args.tol,
               "gating": gating, "pass": rel <= args.tol}
    results = {"regime": regime.value, **vars(rep)}
    _emit(args, report(_resolved(args), results, verdict))
    if gating and not verdict["pass"]:
        return EXIT_FAIL
    return EXIT_OK


def cmd_regimes(args) -> int:
    params = _params(args)
    results = {"regime": classify_regime(params).value}
    if params.beta > 0:
        results["crossover_alpha"] = crossover_alpha(params.beta)
    try:
        spec = bound_exponents(params)
        results.update(e_fast=spec.e_fast, e_slow=spec.e_slow)
    except RegimeError as exc:
        results["bound"] = str(exc)
    _emit(args, report(_resolved(args), results, {"universally_bounded": "e_fast" in results}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common(p, *, atol, alpha=0.5, beta=1.0, model=True, tolerances=True):
    if model:
        p.add_argument("--alpha", type=float, default=alpha, help="damping exponent")
        p.add_argument("--beta", type=float, default=beta, help="restoring exponent")
    if tolerances:
        p.add_argument("--rtol", type=float, default=1e-9)
        p.add_argument("--atol", type=float, default=atol)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odecay",
        description="Simulate and verify energy bounds for u'' + |u'|^a u' + |u|^b u = 0.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one trajectory")
    _common(p, atol=1e-12)
    p.set_defaults(format="csv")
    p.add_argument("--u0", type=float, default=1.0)
    p.add_argument("--v0", type=float, default=0.0)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=10.0)
    p.add_argument("--h-max", type=float, default=None)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None,
                   help="stop when the energy reaches this level")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a decay exponent to a trajectory file")
    _common(p, atol=0.0, model=False, tolerances=False)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--tmin", type=float, required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--npoints", type=int, default=64)
    p.add_argument("--expect-slope", type=float, default=None)
    p.add_argument("--tol", type=float, default=0.10)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("verify-bound", help="estimate and test the universal-bound constant")
    _common(p, atol=1e-30)
    p.add_argument("--scales", type=parse_scales, default=parse_scales("1e0..1e10"))
    p.add_argument("--grid-min", type=float, default=1e-3)
    p.add_argument("--grid-max", type=float, default=1e3)
    p.add_argument("--grid-points", type=int, default=61)
    p.add_argument("--n-oos", type=int, default=22, help="out-of-sample ICs")
    p.add_argument("--oos-factor", type=float, default=2.0)
    p.add_argument("--stability-tol", type=float, default=0.05)
    p.set_defaults(func=cmd_verify_bound)

    p = sub.add_parser("sweep", help="E(t*) against initial energy")
    _common(p, atol=1e-30)
    p.add_argument("--tstar", type=float, default=1.0)
    p.add_argument("--scales", type=parse_scales, default=parse_scales("1e0..1e10"))
    p.add_argument("--ic-mode", choices=("position", "velocity", "random"), default="position")
    p.add_argument("--max-ratio", type=float, default=1.5)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("blowup", help="backward blow-up time and rate")
    _common(p, atol=1e-12, alpha=0.2)
    p.add_argument("--u0", type=float, default=0.1)
    p.add_argument("--v0", type=float, default=0.0)
    p.add_argument("--threshold", type=float, default=1e12)
    p.add_argument("--decades", type=float, default=1.0)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--tol", type=float, default=0.15)
    p.set_defaults(func=cmd_blowup)

    p = sub.add_parser("regimes", help="classify (alpha, beta) and print bound exponents")
    _common(p, atol=0.0, tolerances=False)
    p.set_defaults(func=cmd_regimes)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command != "simulate" and args.format == "csv":
        parser.error("reports are JSON only; --format csv applies to simulate")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except RegimeError as exc:
        print(f"odecay {args.command}: regime error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrationError as exc:
        print(f"odecay {args.command}: integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR
    return EXIT_OK  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
