"""Universal-bound exponents, decay and blow-up rate fits, saturation sweeps."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .integrator import (
    Direction,
    IntegratorConfig,
    Status,
    Trajectory,
    integrate,
    integrate_until_event,
    sample_many,
)
from .model import (
    ModelParams,
    State,
    crossover_alpha,
    energy,
    state_with_energy,
)

__all__ = [
    "BoundSpec", "FitResult", "SaturationReport", "BlowupReport", "IntegrationError",
    "bound_exponents", "universal_bound", "fit_power_law", "fit_decay_exponent",
    "bound_ratios", "estimate_empirical_constant", "sweep_initial_scale",
    "estimate_blowup", "fit_blowup", "crossover_alpha", "scale_ics", "random_ics",
]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class IntegrationError(RuntimeError):
    """An integration ended in a status other than the one requested."""


@dataclass(frozen=True)
class BoundSpec:
    e_fast: float
    e_slow: float
    c_emp: Optional[float] = None


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    t_window: tuple[float, float]
    rms_residual: float
    n_points: int


@dataclass(frozen=True)
class SaturationReport:
    t_star: float
    scales: list[float]
    e_at_tstar: list[float]
    saturation_ratio: float


@dataclass(frozen=True)
class BlowupReport:
    t_blow: float
    rate_fit: FitResult
    threshold: float
    t_event: float


def _workers(n_tasks: int, workers: Optional[int]) -> int:
    if workers is None:
        env = os.environ.get("ODECAY_THREADS")
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(workers, n_tasks))


def _ordered_map(fn: Callable, items: Sequence, workers: Optional[int] = None) -> list:
    """Map ``fn`` over ``items`` on a bounded process pool, results in input order."""
    n = _workers(len(items), workers)
    if n == 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# bound exponents
# ---------------------------------------------------------------------------

def bound_exponents(params: ModelParams) -> BoundSpec:
    """Exponents 2/alpha and (alpha+1)(beta+2)/(beta-alpha) of the universal bound."""
    params.require_bounded_regime()
    a, b = params.alpha, params.beta
    return BoundSpec(2.0 / a, (a + 1.0) * (b + 2.0) / (b - a))


def universal_bound(spec: BoundSpec, t):
    """c_emp * max(t^-e_fast, t^-e_slow)."""
    if spec.c_emp is None:
        raise ValueError("BoundSpec.c_emp is not set")
    return spec.c_emp * _bound_shape(spec, t)


def _bound_shape(spec: BoundSpec, t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be > 0")
    out = np.maximum(t ** -spec.e_fast, t ** -spec.e_slow)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# power-law fits
# ---------------------------------------------------------------------------

def fit_power_law(x, y) -> FitResult:
    """Least squares fit of log y = intercept + slope * log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    return FitResult(float(slope), float(intercept), (float(x.min()), float(x.max())),
                     float(np.sqrt(np.mean(resid ** 2))), int(len(x)))


def fit_decay_exponent(traj: Trajectory, t_min: float, t_max: float,
                       n_points: int = 64) -> FitResult:
    """Slope of log E against log t on ``n_points`` log-uniform times in [t_min, t_max].

    Energies between stored samples are interpolated linearly in (log t,
    log E). The result therefore depends only on (t, E) samples and is
    reproduced exactly from a trajectory written to and read back from disk.
    """
    if not 0 < t_min < t_max:
        raise ValueError(f"need 0 < t_min < t_max, got [{t_min}, {t_max}]")
    if n_points < 8:
        raise ValueError("need at least 8 resampling points")
    times, energies = traj.times, traj.energies
    if traj.direction is Direction.BACKWARD:
        times, energies = times[::-1], energies[::-1]
    if t_min < times[0] or t_max > times[-1]:
        raise ValueError(
            f"window [{t_min}, {t_max}] not covered by trajectory [{times[0]}, {times[-1]}]"
        )
    lo = max(int(np.searchsorted(times, t_min, side="right")) - 1, 0)
    hi = int(np.searchsorted(times, t_max, side="left")) + 1
    t_w, e_w = times[lo:hi], energies[lo:hi]
    if np.any(e_w <= 0):
        raise ValueError("energy reached zero inside the fit window")
    ts = np.geomspace(t_min, t_max, n_points)
    log_e = np.interp(np.log(ts), np.log(t_w), np.log(e_w))
    return fit_power_law(ts, np.exp(log_e))


# ---------------------------------------------------------------------------
# empirical constant
# ---------------------------------------------------------------------------

def scale_ics(params: ModelParams, scales: Iterable[float], mode: str = "position",
              seed: int = 0) -> list[State]:
    """Initial states with prescribed energies.

    ``mode`` is "position" for (u0, 0), "velocity" for (0, v0) or "random"
    for a seeded random angle on each energy level.
    """
    scales = list(scales)
    if mode == "velocity":
        return [State(0.0, math.sqrt(2.0 * s)) for s in scales]
    if mode == "position":
        angles = [0.0] * len(scales)
    elif mode == "random":
        angles = list(np.random.default_rng(seed).uniform(0.0, 2 * math.pi, len(scales)))
    else:
        raise ValueError(f"unknown IC mode {mode!r}")
    return [state_with_energy(params, s, a) for s, a in zip(scales, angles)]


def random_ics(params: ModelParams, n: int, e_min: float, e_max: float,
               seed: int) -> list[State]:
    """``n`` states with log-uniform energies in [e_min, e_max] and random angles."""
    rng = np.random.default_rng(seed)
    es = np.exp(rng.uniform(math.log(e_min), math.log(e_max), n))
    angles = rng.uniform(0.0, 2 * math.pi, n)
    return [state_with_energy(params, float(e), float(a)) for e, a in zip(es, angles)]


def _default_cfg() -> IntegratorConfig:
    # Long decays reach energies near 1e-20; the absolute floor must sit below.
    return IntegratorConfig(rel_tol=1e-9, abs_tol=1e-30)


def _energies_on_grid(task):
    params, ic, t_grid, cfg = task
    t_end = float(np.max(t_grid))
    traj = integrate(params, ic, 0.0, t_end, cfg)
    if traj.status is not Status.COMPLETED:
        return traj.status
    st = sample_many(traj, t_grid)
    return energy(params, (st[:, 0], st[:, 1]))


def bound_ratios(params: ModelParams, ics: Sequence, t_grid,
                 cfg: IntegratorConfig | None = None,
                 workers: Optional[int] = None) -> np.ndarray:
    """E(t)/max(t^-e_fast, t^-e_slow) for every IC (rows) and grid time (columns)."""
    spec = bound_exponents(params)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(t_grid <= 0):
        raise ValueError("t_grid must be non-empty and positive")
    cfg = cfg or _default_cfg()
    tasks = [(params, tuple(ic), t_grid, cfg) for ic in ics]
    results = _ordered_map(_energies_on_grid, tasks, workers)
    shape = _bound_shape(spec, t_grid)
    rows = []
    for i, (ic, res) in enumerate(zip(ics, results)):
        if isinstance(res, Status):
            raise IntegrationError(f"IC #{i} {tuple(ic)}: integration ended with {res.value}")
        rows.append(res / shape)
    return np.array(rows).reshape(len(ics), len(t_grid))


def estimate_empirical_constant(params: ModelParams, ics: Sequence, t_grid,
                                cfg: IntegratorConfig | None = None,
                                workers: Optional[int] = None) -> float:
    """Smallest C with E(t) <= C max(t^-e_fast, t^-e_slow) on the sampled set."""
    r = bound_ratios(params, ics, t_grid, cfg, workers)
    return float(r.max()) if r.size else 0.0


# ---------------------------------------------------------------------------
# saturation sweep
# ---------------------------------------------------------------------------

def _energy_at(task):
    params, ic, t_star, cfg = task
    traj = integrate(params, ic, 0.0, t_star, cfg)
    if traj.status is not Status.COMPLETED:
        return traj.status
    return float(traj.energies[-1])


def sweep_initial_scale(params: ModelParams, t_star: float, scales: Sequence[float],
                        cfg: IntegratorConfig | None = None, ic_mode: str = "position",
                        seed: int = 0, workers: Optional[int] = None) -> SaturationReport:
    """E(t_star) as a function of the initial energy.

    ``saturation_ratio`` is max/min of E(t_star) over the top half of
    ``scales`` (at least one scale); a value near 1 means the state at
    ``t_star`` has forgotten its initial size.
    """
    if not t_star > 0:
        raise ValueError(f"t_star must be > 0, got {t_star}")
    scales = [float(s) for s in scales]
    if not scales:
        raise ValueError("scales must be non-empty")
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly increasing")
    cfg = cfg or _default_cfg()
    ics = scale_ics(params, scales, ic_mode, seed)
    results = _ordered_map(_energy_at, [(params, ic, t_star, cfg) for ic in ics], workers)
    for i, res in enumerate(results):
        if isinstance(res, Status):
            raise IntegrationError(f"scale #{i} E0={scales[i]}: integration ended with {res.value}")
    top = results[len(results) - max(1, len(results) // 2):]
    lo = min(top)
    ratio = max(top) / lo if lo > 0 else math.inf
    return SaturationReport(float(t_star), scales, list(results), float(ratio))


# ---------------------------------------------------------------------------
# backward blow-up
# ---------------------------------------------------------------------------

def _golden_min(fn, a, b, tol=1e-10, max_iter=200):
    """Golden-section minimisation of ``fn`` on [a, b]."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def fit_blowup(times, energies, decades: float = 1.0) -> tuple[float, FitResult]:
    """Fit E ~ |T - t|^slope over the last ``decades`` of energy growth.

    ``times`` run in the integration direction and end just past the
    threshold crossing. T is found by golden-section search on the RMS
    residual, over log|T - t_last| from the last step size up to 100 times
    the duration of the fit window.
    """
    times = np.asarray(times, dtype=float)
    energies = np.asarray(energies, dtype=float)
    sign = 1.0 if times[-1] >= times[0] else -1.0
    elapsed = sign * (times - times[0])
    mask = energies >= energies[-1] * 10.0 ** -decades
    # Only the contiguous tail counts as the final growth phase.
    start = len(mask) - int(np.argmin(mask[::-1])) if not mask.all() else 0
    start = min(start, len(times) - 8)
    if start < 0:
        raise ValueError("need at least 8 samples for a blow-up fit")
    s_w, e_w = elapsed[start:], energies[start:]
    last = s_w[-1]
    last_step = elapsed[-1] - elapsed[-2]
    duration = last - s_w[0]
    if not (last_step > 0 and duration > 0):
        raise ValueError("degenerate fit window")

    def rms(x):
        return fit_power_law(last + math.exp(x) - s_w, e_w).rms_residual

    x = _golden_min(rms, math.log(last_step), math.log(100.0 * duration))
    gap = math.exp(x)
    fit = fit_power_law(last + gap - s_w, e_w)
    t_blow = float(times[0] + sign * (last + gap))
    return t_blow, fit


def estimate_blowup(params: ModelParams, ic, threshold: float,
                    cfg: IntegratorConfig | None = None, t0: float = 0.0,
                    decades: float = 1.0) -> BlowupReport:
    """Integrate backward until E reaches ``threshold`` and fit the blow-up rate."""
    params.require_bounded_regime()
    if ic[0] == 0 and ic[1] == 0:
        raise ValueError("the zero state does not blow up")
    cfg = cfg or IntegratorConfig(rel_tol=1e-9, abs_tol=1e-12, direction=Direction.BACKWARD)
    if cfg.direction is not Direction.BACKWARD:
        cfg = replace(cfg, direction=Direction.BACKWARD)
    traj, ev = integrate_until_event(params, ic, t0, cfg, threshold)
    if not ev.triggered:
        raise IntegrationError(
            f"no blow-up detected before {traj.status.value} "
            f"(reached E={traj.energies[-1]:.3g} at t={traj.times[-1]:.6g})"
        )
    t_blow, fit = fit_blowup(traj.times, traj.energies, decades)
    return BlowupReport(t_blow, fit, float(threshold), float(ev.t_event))
