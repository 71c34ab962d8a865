"""Perturbed energies, their equivalence with E, and comparison bounds.

Two perturbed energies are provided, both of the form E + eps*|u|^q*u*v:

* variant F, q = (alpha/2)(beta+2), for 0 < alpha <= beta/(beta+2);
* variant G, q = (beta-alpha)/(alpha+1), for beta/(beta+2) <= alpha < beta.

For eps <= 1/(beta+2) either one satisfies E/2 - 1/4 <= F <= 2E + 1/4 in its
regime. The differential inequalities they obey carry unspecified constants
and are not checked here; only constant-free statements are.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .integrator import IntegratorConfig, Solution, Trajectory, solve
from .model import ModelParams, RegimeError, crossover_alpha, energy, signed_power

DEFAULT_SEED = 20240601


class EpsilonError(ValueError):
    """The perturbation weight exceeds the range where the sandwich is guaranteed."""


class Variant(enum.Enum):
    F = "F"
    G = "G"


@dataclass(frozen=True)
class PerturbedEnergyConfig:
    epsilon: float
    variant: Variant
    gamma: float
    m_const: float
    epsilon0: float

    @classmethod
    def for_params(cls, params: ModelParams, variant: Variant | str,
                   epsilon: float | None = None) -> "PerturbedEnergyConfig":
        """Derive gamma, M and eps0 from ``params``; eps defaults to eps0."""
        variant = Variant(variant)
        a, b = params.alpha, params.beta
        gamma = (b - a) / (a + 1.0)
        m_const = (b + 2.0) / 2.0
        epsilon0 = 1.0 / (2.0 * m_const)
        eps = epsilon0 if epsilon is None else float(epsilon)
        if not eps > 0:
            raise ValueError(f"epsilon must be > 0, got {eps}")
        return cls(eps, variant, gamma, m_const, epsilon0)

    def exponent(self, params: ModelParams) -> float:
        """The power q in the cross term |u|^q * u * v."""
        if self.variant is Variant.F:
            return 0.5 * params.alpha * (params.beta + 2.0)
        return self.gamma


def perturbed_energy(params: ModelParams, s, cfg: PerturbedEnergyConfig):
    u, v = s
    return energy(params, s) + cfg.epsilon * signed_power(u, cfg.exponent(params) + 1.0) * v


def check_sandwich_preconditions(params: ModelParams, cfg: PerturbedEnergyConfig) -> None:
    """Raise RegimeError or EpsilonError if the sandwich is not guaranteed."""
    a, b = params.alpha, params.beta
    if b <= 0:
        raise RegimeError(f"sandwich requires beta > 0 (got beta={b})")
    a0 = crossover_alpha(b)
    if cfg.variant is Variant.F and not 0 < a <= a0:
        raise RegimeError(
            f"variant F requires 0 < alpha <= beta/(beta+2) = {a0} (got alpha={a})"
        )
    if cfg.variant is Variant.G and not a0 <= a < b:
        raise RegimeError(
            f"variant G requires beta/(beta+2) = {a0} <= alpha < beta = {b} (got alpha={a})"
        )
    if cfg.epsilon > cfg.epsilon0:
        raise EpsilonError(f"epsilon={cfg.epsilon} exceeds epsilon0={cfg.epsilon0}")


def _sandwich_mask(params, u, v, cfg):
    e = energy(params, (u, v))
    pe = perturbed_energy(params, (u, v), cfg)
    return (0.5 * e - 0.25 <= pe) & (pe <= 2.0 * e + 0.25)


def sandwich_holds(params: ModelParams, s, cfg: PerturbedEnergyConfig) -> bool:
    """Whether E/2 - 1/4 <= perturbed energy <= 2E + 1/4 at ``s``."""
    check_sandwich_preconditions(params, cfg)
    return bool(_sandwich_mask(params, s[0], s[1], cfg))


def count_sandwich_violations(params: ModelParams, states: np.ndarray,
                              cfg: PerturbedEnergyConfig) -> int:
    """Number of rows (u, v) of ``states`` where the sandwich fails."""
    check_sandwich_preconditions(params, cfg)
    states = np.asarray(states, dtype=float)
    ok = _sandwich_mask(params, states[:, 0], states[:, 1], cfg)
    return int(np.count_nonzero(~ok))


def random_states(n: int, seed: int = DEFAULT_SEED, low: float = 1e-6,
                  high: float = 1e3) -> np.ndarray:
    """``n`` states with log-uniform |u|, |v| in [low, high] and random signs."""
    rng = np.random.default_rng(seed)
    mags = np.exp(rng.uniform(math.log(low), math.log(high), size=(n, 2)))
    signs = rng.choice([-1.0, 1.0], size=(n, 2))
    return mags * signs


# ---------------------------------------------------------------------------
# energy law along trajectories
# ---------------------------------------------------------------------------

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(5)


def dissipated_energy(params: ModelParams, traj: Trajectory, method: str = "auto") -> float:
    """Quadrature of |v|^(alpha+2) over the trajectory's time span.

    ``"trapezoid"`` uses the accepted samples only. ``"gauss"`` applies
    5-point Gauss-Legendre on each step through the dense interpolant, which
    is needed to resolve the integral to ~1e-8 at tight tolerances.
    ``"auto"`` picks gauss whenever dense output is available.
    """
    p = params.alpha + 2.0
    h = np.diff(traj.times)
    if method == "auto":
        method = "gauss" if traj.dense is not None else "trapezoid"
    if method == "trapezoid":
        f = np.abs(traj.v) ** p
        return float(np.sum(0.5 * h * (f[1:] + f[:-1])))
    if method != "gauss":
        raise ValueError(f"unknown quadrature method {method!r}")
    if traj.dense is None:
        raise ValueError("gauss quadrature needs a trajectory with dense output")
    c = traj.dense[:, :, 1]
    total = np.zeros_like(h)
    for x, w in zip(_GAUSS_NODES, _GAUSS_WEIGHTS):
        th = 0.5 * (x + 1.0)
        t1 = 1.0 - th
        v = c[:, 0] + th * (c[:, 1] + t1 * (c[:, 2] + th * (c[:, 3] + t1 * c[:, 4])))
        total += 0.5 * w * np.abs(v) ** p
    return float(np.sum(h * total))


def dissipation_residual(params: ModelParams, traj: Trajectory, method: str = "auto") -> float:
    """|E(end) - E(start) + Q| with Q the dissipated energy over the run."""
    if len(traj) < 2:
        raise ValueError("need a trajectory with at least two samples")
    if traj.times[-1] < traj.times[0]:
        raise ValueError("dissipation residual is defined for forward trajectories only")
    q = dissipated_energy(params, traj, method)
    return abs(float(traj.energies[-1] - traj.energies[0]) + q)


# ---------------------------------------------------------------------------
# comparison bound for y' <= -rho*y^(1+alpha/2) + K
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GhidagliaParams:
    rho: float
    k_const: float
    alpha: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.k_const < 0:
            raise ValueError(f"k_const must be >= 0, got {self.k_const}")


def ghidaglia_bound(g: GhidagliaParams, t):
    """Upper bound at time t > 0 for any positive y with y' <= -rho y^(1+mu) + K.

    With mu = alpha/2 the bound is (K/rho)^(1/(1+mu)) + (rho*mu*t)^(-1/mu);
    it holds whatever y(0) is.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be > 0")
    mu = 0.5 * g.alpha
    out = (g.k_const / g.rho) ** (1.0 / (1.0 + mu)) + (g.rho * mu * t) ** (-1.0 / mu)
    return float(out) if out.ndim == 0 else out


def ghidaglia_solution(g: GhidagliaParams, y0: float, t_end: float,
                       cfg: IntegratorConfig | None = None) -> Solution:
    """Integrate the equality case y' = -rho y^(1+alpha/2) + K from y(0) = y0."""
    if not y0 > 0:
        raise ValueError(f"y0 must be > 0, got {y0}")
    p = 1.0 + 0.5 * g.alpha
    rho, k = g.rho, g.k_const

    def f(y):
        x = y[0]
        return (-rho * math.copysign(abs(x) ** p, x) + k,)

    # tight default: near K = 0 the true margin below the bound is ~y0^-mu/(rho*mu*t)
    cfg = cfg or IntegratorConfig(rel_tol=1e-14, abs_tol=1e-30)
    return solve(f, (y0,), 0.0, t_end, cfg)
