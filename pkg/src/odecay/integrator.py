"""Adaptive Dormand-Prince 5(4) integration with dense output and energy events.

The stepping core (:func:`solve`) works on any small autonomous system given
as a function of a tuple of floats; :func:`integrate` and
:func:`integrate_until_event` specialise it to the oscillator and attach
energies. Everything is plain-float Python: the systems are 1- or
2-dimensional, where numpy per-call overhead dominates.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .model import ModelParams, State, energy

# Dormand & Prince (1980) coefficients; the system is autonomous so the
# stage nodes are not needed.
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# 5th-order minus embedded 4th-order weights.
E1, E3, E4, E5, E6, E7 = (
    71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)
# Continuous extension (Hairer, Norsett & Wanner, dopri5 "contd5").
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423

SAFETY = 0.9
MIN_FACTOR, MAX_FACTOR = 0.2, 5.0
PI_BETA = 0.04
PI_EXPO = 0.2 - 0.75 * PI_BETA

EVENT_RTOL = 1e-10


class Direction(enum.Enum):
    FORWARD = 1
    BACKWARD = -1


class Status(enum.Enum):
    COMPLETED = "Completed"
    EVENT_STOPPED = "EventStopped"
    STEP_LIMIT_EXCEEDED = "StepLimitExceeded"
    NON_FINITE = "NonFinite"


@dataclass(frozen=True)
class IntegratorConfig:
    """Step-control settings.

    ``h_init=None`` selects the first step automatically. ``h_max=None`` caps
    steps at 1% of the requested horizon (unbounded for open-ended event
    runs). ``max_steps=None`` means 10**6 forward and 10**7 backward.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    h_init: Optional[float] = None
    h_max: Optional[float] = None
    max_steps: Optional[int] = None
    direction: Direction = Direction.FORWARD

    def __post_init__(self):
        if not 0 < self.rel_tol <= 1e-2:
            raise ValueError(f"rel_tol must be in (0, 1e-2], got {self.rel_tol}")
        if not self.abs_tol > 0:
            raise ValueError(f"abs_tol must be > 0, got {self.abs_tol}")
        if self.h_init is not None and not self.h_init > 0:
            raise ValueError(f"h_init must be > 0, got {self.h_init}")
        if self.h_max is not None and not self.h_max > 0:
            raise ValueError(f"h_max must be > 0, got {self.h_max}")
        if self.h_init is not None and self.h_max is not None and self.h_init > self.h_max:
            raise ValueError("h_init must not exceed h_max")
        if self.max_steps is not None and self.max_steps <= 0:
            raise ValueError(f"max_steps must be > 0, got {self.max_steps}")
        object.__setattr__(self, "direction", Direction(self.direction))

    @property
    def sign(self) -> int:
        return self.direction.value

    def step_limit(self) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return 10**6 if self.direction is Direction.FORWARD else 10**7


# ---------------------------------------------------------------------------
# single step
# ---------------------------------------------------------------------------

def _rk_step(f, y, h, k1, rtol, atol):
    """One DP5(4) step from ``y`` with known ``k1 = f(y)``.

    Returns (y_new, k7, err, dense) where dense holds the five coefficient
    tuples of the continuous extension; err is inf on any non-finite stage.
    """
    k2 = f(tuple(yi + h * A21 * a for yi, a in zip(y, k1)))
    k3 = f(tuple(yi + h * (A31 * a + A32 * b) for yi, a, b in zip(y, k1, k2)))
    k4 = f(tuple(yi + h * (A41 * a + A42 * b + A43 * c)
                 for yi, a, b, c in zip(y, k1, k2, k3)))
    k5 = f(tuple(yi + h * (A51 * a + A52 * b + A53 * c + A54 * d)
                 for yi, a, b, c, d in zip(y, k1, k2, k3, k4)))
    k6 = f(tuple(yi + h * (A61 * a + A62 * b + A63 * c + A64 * d + A65 * e)
                 for yi, a, b, c, d, e in zip(y, k1, k2, k3, k4, k5)))
    y_new = tuple(yi + h * (A71 * a + A73 * c + A74 * d + A75 * e + A76 * g)
                  for yi, a, c, d, e, g in zip(y, k1, k3, k4, k5, k6))
    k7 = f(y_new)
    acc = 0.0
    for yi, yn, a, c, d, e, g, q in zip(y, y_new, k1, k3, k4, k5, k6, k7):
        ei = h * (E1 * a + E3 * c + E4 * d + E5 * e + E6 * g + E7 * q)
        sc = atol + rtol * max(abs(yi), abs(yn))
        r = ei / sc
        acc += r * r
    err = math.sqrt(acc / len(y))
    if not math.isfinite(err):
        return y_new, k7, math.inf, None
    dense = _dense_coefficients(y, y_new, h, k1, k3, k4, k5, k6, k7)
    return y_new, k7, err, dense


def _dense_coefficients(y, y_new, h, k1, k3, k4, k5, k6, k7):
    r2 = tuple(b - a for a, b in zip(y, y_new))
    r3 = tuple(h * a - d for a, d in zip(k1, r2))
    r4 = tuple(d - h * q - b for d, q, b in zip(r2, k7, r3))
    r5 = tuple(h * (D1 * a + D3 * c + D4 * d + D5 * e + D6 * g + D7 * q)
               for a, c, d, e, g, q in zip(k1, k3, k4, k5, k6, k7))
    return (tuple(y), r2, r3, r4, r5)


def _dense_eval(coef, theta):
    y, r2, r3, r4, r5 = coef
    t1 = 1.0 - theta
    return tuple(a + theta * (b + t1 * (c + theta * (d + t1 * e)))
                 for a, b, c, d, e in zip(y, r2, r3, r4, r5))


def _pow(x, p):
    # float ** raises on overflow; the driver expects inf instead
    try:
        return math.copysign(abs(x) ** p, x)
    except OverflowError:
        return math.copysign(math.inf, x)


def _model_rhs(params: ModelParams):
    ap1 = params.alpha + 1.0
    bp1 = params.beta + 1.0

    def f(y):
        u, v = y
        du = 0.0 if v == 0.0 else _pow(v, ap1)
        ru = 0.0 if u == 0.0 else _pow(u, bp1)
        return (v, -du - ru)

    return f


def step(params: ModelParams, s, t: float, h: float,
         rel_tol: float = 1e-9, abs_tol: float = 1e-12) -> tuple[State, float]:
    """Advance the oscillator by one DP5(4) step of signed size ``h``.

    Returns the 5th-order state and the weighted RMS error estimate (accept
    when <= 1). A non-finite stage is signalled by ``err == inf``. ``t`` is
    accepted for interface symmetry; the system is autonomous.
    """
    if h == 0:
        raise ValueError("step size must be non-zero")
    y = (float(s[0]), float(s[1]))
    if not all(math.isfinite(c) for c in y):
        raise ValueError(f"state must be finite, got {y}")
    f = _model_rhs(params)
    y_new, _, err, _ = _rk_step(f, y, h, f(y), rel_tol, abs_tol)
    return State(*y_new), err


# ---------------------------------------------------------------------------
# generic adaptive driver
# ---------------------------------------------------------------------------

@dataclass
class Solution:
    """Raw output of :func:`solve`."""

    times: list
    ys: list
    dense: list
    accepted_steps: int
    rejected_steps: int
    status: Status
    t_event: Optional[float] = None

    def sample(self, ts) -> np.ndarray:
        """Dense-output values at ``ts``, shape (len(ts), dim)."""
        dense = np.array(self.dense, dtype=float) if self.dense else None
        return _dense_sample(np.array(self.times), np.array(self.ys), dense, ts)


def _rms(vals):
    return math.sqrt(sum(x * x for x in vals) / len(vals))


def _initial_step(f, y, f0, sign, rtol, atol, h_max):
    sc = [atol + rtol * abs(yi) for yi in y]
    d0 = _rms([yi / s for yi, s in zip(y, sc)])
    d1 = _rms([fi / s for fi, s in zip(f0, sc)])
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, h_max)
    y1 = tuple(yi + sign * h0 * fi for yi, fi in zip(y, f0))
    f1 = f(y1)
    if not all(math.isfinite(c) for c in f1):
        return h0 * 1e-3
    d2 = _rms([(a - b) / s for a, b, s in zip(f1, f0, sc)]) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, h_max)


def solve(f: Callable[[tuple], tuple], y0: Sequence[float], t0: float,
          t1: float, cfg: IntegratorConfig,
          event: Optional[Callable[[tuple], float]] = None) -> Solution:
    """Integrate the autonomous system y' = f(y) from t0 towards t1.

    ``t1`` may be +-inf for open-ended runs that rely on ``event`` or the
    step limit to stop. ``event(y)`` is a scalar function; the run stops at
    the first accepted step where it becomes >= 0 (it must be < 0 at y0), and
    the crossing time is refined by bisection on the dense interpolant.
    """
    sign = cfg.sign
    if t1 == t0:
        raise ValueError("t1 must differ from t0")
    if (t1 - t0) * sign < 0:
        raise ValueError(f"direction {cfg.direction.name} inconsistent with t0={t0}, t1={t1}")
    rtol, atol = cfg.rel_tol, cfg.abs_tol
    horizon = abs(t1 - t0)
    if cfg.h_max is not None:
        h_max = cfg.h_max
    else:
        h_max = 0.01 * horizon if math.isfinite(horizon) else math.inf
    max_steps = cfg.step_limit()

    y = tuple(float(c) for c in y0)
    if not all(math.isfinite(c) for c in y):
        raise ValueError(f"initial state must be finite, got {y}")
    t = float(t0)
    times, ys, dense = [t], [y], []
    k1 = f(y)
    if event is not None and event(y) >= 0:
        raise ValueError("event function is already non-negative at the initial state")

    if all(c == 0.0 for c in k1):
        # Equilibrium: the solution is constant, no stepping needed.
        if math.isfinite(t1):
            times.append(float(t1))
            ys.append(y)
            dense.append((y,) + tuple((0.0,) * len(y) for _ in range(4)))
            return Solution(times, ys, dense, 1, 0, Status.COMPLETED)
        return Solution(times, ys, dense, 0, 0, Status.STEP_LIMIT_EXCEEDED)

    if cfg.h_init is not None:
        h = min(cfg.h_init, h_max)
    else:
        h = _initial_step(f, y, k1, sign, rtol, atol, h_max)
    fac_old = 1e-4
    last_rejected = False
    accepted = rejected = 0
    status = Status.COMPLETED
    t_event = None

    while True:
        if accepted + rejected >= max_steps:
            status = Status.STEP_LIMIT_EXCEEDED
            break
        last = False
        if math.isfinite(t1) and (t + sign * h - t1) * sign >= 0:
            h = abs(t1 - t)
            last = True
        if t + sign * h == t or h == 0.0:
            # step size underflow: only happens at a singularity
            status = Status.NON_FINITE
            break
        y_new, k7, err, coef = _rk_step(f, y, sign * h, k1, rtol, atol)
        if err <= 1.0:
            accepted += 1
            t_new = t1 if last else t + sign * h
            fac11 = err ** PI_EXPO
            fac = fac11 / fac_old ** PI_BETA
            fac = min(MAX_FACTOR, max(MIN_FACTOR, SAFETY / fac)) if fac > 0 else MAX_FACTOR
            h_new = min(h * fac, h_max)
            if last_rejected:
                h_new = min(h_new, h)
            fac_old = max(err, 1e-4)
            last_rejected = False
            times.append(t_new)
            ys.append(y_new)
            dense.append(coef)
            if event is not None and event(y_new) >= 0:
                t_event = _locate_event(event, coef, t, t_new, t0)
                status = Status.EVENT_STOPPED
                break
            t, y, k1, h = t_new, y_new, k7, h_new
            if last:
                break
        else:
            rejected += 1
            if math.isfinite(err):
                h *= max(MIN_FACTOR, SAFETY * err ** -PI_EXPO)
            else:
                h *= MIN_FACTOR
            last_rejected = True

    return Solution(times, ys, dense, accepted, rejected, status, t_event)


def _locate_event(event, coef, t_lo, t_hi, t0):
    """Bisect the dense interpolant for the first crossing of ``event`` = 0.

    Returns a time where event >= 0; the bracket is shrunk until its width is
    at most EVENT_RTOL times the elapsed time.
    """
    lo, hi = 0.0, 1.0
    h = t_hi - t_lo
    width_tol = EVENT_RTOL * max(abs(t_hi - t0), abs(h))
    while abs(h) * (hi - lo) > width_tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if event(_dense_eval(coef, mid)) >= 0:
            hi = mid
        else:
            lo = mid
    return t_hi if hi == 1.0 else t_lo + hi * h


# ---------------------------------------------------------------------------
# oscillator trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Sampled solution of the oscillator.

    ``states`` has shape (n, 2) with columns (u, v). ``dense`` holds the
    interpolation coefficients of each accepted step, shape (n-1, 5, 2); it
    is ``None`` for trajectories read back from disk, as is ``params`` for
    trajectories read from CSV.
    """

    params: Optional[ModelParams]
    times: np.ndarray
    states: np.ndarray
    energies: np.ndarray
    accepted_steps: int = 0
    rejected_steps: int = 0
    status: Status = Status.COMPLETED
    dense: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float).reshape(-1, 2)
        self.energies = np.asarray(self.energies, dtype=float)
        if not len(self.times) == len(self.states) == len(self.energies):
            raise ValueError("times, states and energies must have equal length")

    def __len__(self):
        return len(self.times)

    @property
    def u(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def direction(self) -> Direction:
        if len(self.times) > 1 and self.times[-1] < self.times[0]:
            return Direction.BACKWARD
        return Direction.FORWARD

    def state(self, i: int) -> State:
        return State(float(self.states[i, 0]), float(self.states[i, 1]))


@dataclass(frozen=True)
class EventReport:
    triggered: bool
    t_event: Optional[float]
    threshold: float


def _to_trajectory(params: ModelParams, sol: Solution) -> Trajectory:
    states = np.array(sol.ys, dtype=float)
    dense = np.array(sol.dense, dtype=float) if sol.dense else None
    return Trajectory(
        params=params,
        times=np.array(sol.times, dtype=float),
        states=states,
        energies=energy(params, (states[:, 0], states[:, 1])),
        accepted_steps=sol.accepted_steps,
        rejected_steps=sol.rejected_steps,
        status=sol.status,
        dense=dense,
    )


def _energy_event(params: ModelParams, threshold: float):
    b2 = params.beta + 2.0

    def g(y):
        u, v = y
        return 0.5 * v * v + abs(u) ** b2 / b2 - threshold

    return g


def integrate(params: ModelParams, ic, t0: float, t1: float,
              cfg: IntegratorConfig | None = None,
              energy_threshold: float | None = None) -> Trajectory:
    """Integrate the oscillator from ``ic`` at ``t0`` to ``t1``.

    The direction of ``cfg`` must agree with sign(t1 - t0); when ``cfg`` is
    omitted it is inferred. Samples are returned at every accepted step.
    With ``energy_threshold`` the run also stops (status EventStopped) at the
    first step on which the energy reaches the threshold.
    """
    if cfg is None:
        cfg = IntegratorConfig(direction=Direction.FORWARD if t1 >= t0 else Direction.BACKWARD)
    event = None if energy_threshold is None else _energy_event(params, energy_threshold)
    sol = solve(_model_rhs(params), ic, t0, t1, cfg, event=event)
    return _to_trajectory(params, sol)


def integrate_until_event(params: ModelParams, ic, t0: float,
                          cfg: IntegratorConfig, energy_threshold: float
                          ) -> tuple[Trajectory, EventReport]:
    """Integrate in ``cfg.direction`` until the energy reaches ``energy_threshold``."""
    e0 = energy(params, ic)
    if not energy_threshold > e0:
        raise ValueError(
            f"energy_threshold ({energy_threshold}) must exceed the initial energy ({e0})"
        )
    g = _energy_event(params, energy_threshold)
    t1 = math.inf * cfg.sign
    sol = solve(_model_rhs(params), ic, t0, t1, cfg, event=g)
    traj = _to_trajectory(params, sol)
    triggered = sol.status is Status.EVENT_STOPPED
    return traj, EventReport(triggered, sol.t_event if triggered else None, energy_threshold)


def sample_at(traj: Trajectory, t: float) -> State:
    """Evaluate the trajectory at time ``t`` using the 4th-order interpolant.

    Stored sample times return the stored state exactly.
    """
    u, v = _dense_sample(traj.times, traj.states, traj.dense, [t])[0]
    return State(float(u), float(v))


def _dense_sample(times, ys, dense, ts):
    """Evaluate sampled solution data at ``ts``; shape (len(ts), dim)."""
    ts = np.asarray(ts, dtype=float)
    backward = len(times) > 1 and times[-1] < times[0]
    key, q = (-times, -ts) if backward else (times, ts)
    if ts.size and (q.min() < key[0] or q.max() > key[-1]):
        raise ValueError(
            f"sample times outside trajectory span [{min(times[0], times[-1])}, "
            f"{max(times[0], times[-1])}]"
        )
    idx = np.clip(np.searchsorted(key, q, side="right") - 1, 0, len(times) - 1)
    out = np.empty((len(ts), ys.shape[1]))
    exact = times[idx] == ts
    out[exact] = ys[idx[exact]]
    rest = ~exact
    if rest.any():
        if dense is None:
            raise ValueError("trajectory carries no dense output; only stored times can be sampled")
        i = idx[rest]
        theta = ((ts[rest] - times[i]) / (times[i + 1] - times[i]))[:, None]
        c = dense[i]
        t1 = 1.0 - theta
        out[rest] = c[:, 0] + theta * (c[:, 1] + t1 * (c[:, 2] + theta * (c[:, 3] + t1 * c[:, 4])))
    return out


def sample_many(traj: Trajectory, ts) -> np.ndarray:
    """Vectorised :func:`sample_at`; returns an array of shape (len(ts), 2)."""
    return _dense_sample(traj.times, traj.states, traj.dense, ts)
