"""The scalar oscillator u'' + |u'|^alpha u' + |u|^beta u = 0.

Phase-space formulation, energy and regime classification. Functions here
accept plain floats or numpy arrays (elementwise) unless noted.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class RegimeError(ValueError):
    """Raised when an operation needs exponents in a range they are not in."""


@dataclass(frozen=True)
class ModelParams:
    """Damping exponent ``alpha`` and restoring exponent ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        a, b = float(self.alpha), float(self.beta)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError(f"exponents must be finite, got alpha={a}, beta={b}")
        if a < 0 or b < 0:
            raise ValueError(f"exponents must be non-negative, got alpha={a}, beta={b}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    def require_bounded_regime(self) -> None:
        """Raise :class:`RegimeError` unless 0 < alpha < beta."""
        if self.alpha <= 0:
            raise RegimeError(f"requires alpha > 0 (got alpha={self.alpha})")
        if self.alpha >= self.beta:
            raise RegimeError(
                f"requires alpha < beta (got alpha={self.alpha} >= beta={self.beta})"
            )


class State(NamedTuple):
    u: float
    v: float


class Regime(enum.Enum):
    SUB_CRITICAL = "SubCritical"
    SUPER_CRITICAL = "SuperCritical"
    NO_UNIVERSAL_BOUND = "NoUniversalBound"
    DEGENERATE = "Degenerate"


def signed_power(x, p):
    """Return sgn(x) * |x|**p, with signed_power(0, p) == 0 for every p >= 0.

    The sign is split off before exponentiation so that non-integer ``p``
    never produces a complex power of a negative base.
    """
    if p < 0:
        raise ValueError(f"p must be >= 0, got {p}")
    if np.ndim(x) == 0:
        x = float(x)
        if x == 0.0:
            return 0.0
        return math.copysign(abs(x) ** p, x)
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** p


def vector_field(params: ModelParams, s) -> tuple[float, float]:
    """Right-hand side (du, dv) = (v, -|v|^alpha v - |u|^beta u)."""
    u, v = s
    return v, -signed_power(v, params.alpha + 1.0) - signed_power(u, params.beta + 1.0)


def energy(params: ModelParams, s):
    """E = v^2/2 + |u|^(beta+2)/(beta+2)."""
    u, v = s
    b2 = params.beta + 2.0
    if np.ndim(u) or np.ndim(v):
        u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
        return 0.5 * v * v + np.abs(u) ** b2 / b2
    return 0.5 * v * v + abs(u) ** b2 / b2


def dissipation_rate(params: ModelParams, s):
    """dE/dt along solutions: -|v|^(alpha+2)."""
    _, v = s
    if np.ndim(v):
        return -np.abs(np.asarray(v, dtype=float)) ** (params.alpha + 2.0)
    return -abs(v) ** (params.alpha + 2.0)


def crossover_alpha(beta: float) -> float:
    """Critical damping exponent beta/(beta+2) separating the two bound regimes."""
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    return beta / (beta + 2.0)


def classify_regime(params: ModelParams) -> Regime:
    """Classify (alpha, beta).

    The boundary alpha == beta/(beta+2) is reported as SUB_CRITICAL (both
    bound theorems apply there). Any zero exponent is DEGENERATE; among the
    remaining pairs alpha >= beta is NO_UNIVERSAL_BOUND.
    """
    a, b = params.alpha, params.beta
    if a == 0 or b == 0:
        return Regime.DEGENERATE
    if a >= b:
        return Regime.NO_UNIVERSAL_BOUND
    if a <= crossover_alpha(b):
        return Regime.SUB_CRITICAL
    return Regime.SUPER_CRITICAL


def state_with_energy(params: ModelParams, e0: float, angle: float = 0.0) -> State:
    """A phase point with energy ``e0`` at a given angle on the energy level set.

    The potential part of the energy is e0*cos(angle)^2 and the kinetic part
    e0*sin(angle)^2, with the signs of u and v those of cos and sin. So
    ``angle=0`` gives (u0, 0) with u0 = ((beta+2) e0)^(1/(beta+2)).
    """
    if e0 < 0:
        raise ValueError(f"energy must be >= 0, got {e0}")
    b2 = params.beta + 2.0
    c, s = math.cos(angle), math.sin(angle)
    u = math.copysign((b2 * e0 * c * c) ** (1.0 / b2), c) if c != 0 else 0.0
    v = math.copysign(math.sqrt(2.0 * e0 * s * s), s) if s != 0 else 0.0
    return State(u, v)
