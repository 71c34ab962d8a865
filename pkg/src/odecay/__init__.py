"""Simulation and verification toolkit for u'' + |u'|^alpha u' + |u|^beta u = 0."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    ModelParams,
    Regime,
    RegimeError,
    State,
    classify_regime,
    crossover_alpha,
    dissipation_rate,
    energy,
    signed_power,
    state_with_energy,
    vector_field,
)
from .integrator import (  # noqa: E402
    Direction,
    EventReport,
    IntegratorConfig,
    Status,
    Trajectory,
    integrate,
    integrate_until_event,
    sample_at,
    sample_many,
    step,
)

__all__ = [
    "ModelParams", "Regime", "RegimeError", "State", "classify_regime", "crossover_alpha",
    "dissipation_rate", "energy", "signed_power", "state_with_energy", "vector_field",
    "Direction", "EventReport", "IntegratorConfig", "Status", "Trajectory", "integrate",
    "integrate_until_event", "sample_at", "sample_many", "step",
]
