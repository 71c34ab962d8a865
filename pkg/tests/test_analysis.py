import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from odecay.analysis import (
    BoundSpec,
    IntegrationError,
    bound_exponents,
    bound_ratios,
    crossover_alpha,
    estimate_blowup,
    estimate_empirical_constant,
    fit_blowup,
    fit_decay_exponent,
    fit_power_law,
    random_ics,
    scale_ics,
    sweep_initial_scale,
    universal_bound,
)
from odecay.integrator import Direction, IntegratorConfig, Trajectory, integrate
from odecay.model import ModelParams, RegimeError, energy


def synthetic(times, energies):
    times = np.asarray(times, dtype=float)
    return Trajectory(params=None, times=times, states=np.zeros((len(times), 2)),
                      energies=np.asarray(energies, dtype=float))


# --- exponents and the bound --------------------------------------------------

@pytest.mark.parametrize("alpha, beta, fast, slow", [(0.5, 1.0, 4.0, 9.0), (0.2, 1.0, 10.0, 4.5)])
def test_bound_exponents(alpha, beta, fast, slow):
    spec = bound_exponents(ModelParams(alpha, beta))
    assert spec.e_fast == pytest.approx(fast) and spec.e_slow == pytest.approx(slow)
    assert spec.c_emp is None


@pytest.mark.parametrize("alpha, beta", [(1.0, 1.0), (2.0, 1.0), (0.0, 1.0)])
def test_bound_exponents_regime_error(alpha, beta):
    with pytest.raises(RegimeError):
        bound_exponents(ModelParams(alpha, beta))


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0, 5.0])
def test_exponent_crossover_identity(beta):
    spec = bound_exponents(ModelParams(crossover_alpha(beta), beta))
    assert spec.e_fast == pytest.approx(2 * (beta + 2) / beta, abs=1e-12)
    assert spec.e_slow == pytest.approx(spec.e_fast, abs=1e-12)


@pytest.mark.parametrize("t, expected", [(1.0, 1.0), (4.0, 3.90625e-3), (0.5, 512.0)])
def test_universal_bound_examples(t, expected):
    spec = BoundSpec(4.0, 9.0, c_emp=1.0)
    assert universal_bound(spec, t) == pytest.approx(expected)


def test_universal_bound_needs_constant_and_positive_time():
    with pytest.raises(ValueError):
        universal_bound(BoundSpec(4.0, 9.0), 1.0)
    with pytest.raises(ValueError):
        universal_bound(BoundSpec(4.0, 9.0, 1.0), 0.0)


exps = st.floats(0.1, 20.0)


@given(exps, exps, st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_universal_bound_monotone_and_branch(e1, e2, t1, t2):
    spec = BoundSpec(e1, e2, c_emp=2.5)
    lo, hi = sorted((t1, t2))
    assert universal_bound(spec, hi) <= universal_bound(spec, lo)
    small, large = min(e1, e2), max(e1, e2)
    for t in (t1, t2):
        picked = small if t >= 1 else large
        assert universal_bound(spec, t) == pytest.approx(2.5 * t ** -picked, rel=1e-12)


# --- fitting --------------------------------------------------------------------

def test_fit_exact_power_law():
    t = np.geomspace(0.1, 1e4, 300)
    fit = fit_decay_exponent(synthetic(t, t ** -4.0), 1.0, 1e3)
    assert fit.slope == pytest.approx(-4.0, abs=1e-9)
    assert fit.n_points == 64 and fit.t_window == pytest.approx((1.0, 1e3))
    assert fit.rms_residual < 1e-9


def test_fit_recovers_prefactor():
    t = np.linspace(0.5, 200.0, 50)
    fit = fit_decay_exponent(synthetic(t, 7.0 * t ** -2.0), 1.0, 100.0, n_points=16)
    assert fit.slope == pytest.approx(-2.0, abs=1e-9)
    assert fit.intercept == pytest.approx(math.log(7.0), abs=1e-9)


def test_fit_errors():
    t = np.geomspace(1.0, 100.0, 30)
    traj = synthetic(t, t ** -1.0)
    with pytest.raises(ValueError, match="not covered"):
        fit_decay_exponent(traj, 0.5, 10.0)
    with pytest.raises(ValueError):
        fit_decay_exponent(traj, 10.0, 10.0)
    with pytest.raises(ValueError):
        fit_decay_exponent(traj, 0.0, 10.0)
    with pytest.raises(ValueError):
        fit_decay_exponent(traj, 2.0, 10.0, n_points=4)
    zeroed = synthetic(t, np.where(t > 50, 0.0, t ** -1.0))
    with pytest.raises(ValueError, match="zero"):
        fit_decay_exponent(zeroed, 2.0, 80.0)
    with pytest.raises(ValueError):
        fit_power_law([1.0, 2.0], [1.0, -1.0])


def test_super_critical_decay_rate():
    p = ModelParams(0.5, 1.0)
    traj = integrate(p, (1.0, 0.0), 0.0, 1e5, IntegratorConfig(rel_tol=1e-9, abs_tol=1e-30))
    fit = fit_decay_exponent(traj, 1e3, 1e5)
    assert fit.slope == pytest.approx(-4.0, rel=0.10)


# --- empirical constant ---------------------------------------------------------

def test_empirical_constant_of_zero_state():
    assert estimate_empirical_constant(ModelParams(0.5, 1.0), [(0.0, 0.0)], [1.0, 2.0]) == 0.0


def test_empirical_constant_regime_error():
    with pytest.raises(RegimeError):
        estimate_empirical_constant(ModelParams(2.0, 1.0), [(1.0, 0.0)], [1.0])


def test_empirical_constant_covers_sample_and_generalises():
    p = ModelParams(0.5, 1.0)
    grid = np.geomspace(1e-3, 1e3, 31)
    ics = scale_ics(p, 10.0 ** np.arange(0, 11, 2))
    c = estimate_empirical_constant(p, ics, grid)
    assert math.isfinite(c) and c > 0
    spec = BoundSpec(**{**bound_exponents(p).__dict__, "c_emp": c})
    for ic in ics:
        traj = integrate(p, ic, 0.0, 1e3, IntegratorConfig(rel_tol=1e-9, abs_tol=1e-30))
        inside = traj.times > 0
        assert np.all(traj.energies[inside] <= universal_bound(spec, traj.times[inside]) * (1 + 1e-6))
    fresh = random_ics(p, 8, 1.0, 1e10, seed=5)
    assert bound_ratios(p, fresh, grid).max() <= 2 * c


def test_bound_ratios_identify_failing_ic():
    p = ModelParams(0.5, 1.0)
    with pytest.raises(IntegrationError, match="IC #1"):
        bound_ratios(p, [(0.0, 0.0), (1.0, 0.0)], [10.0], IntegratorConfig(max_steps=3))


def test_bound_ratios_parallel_matches_serial():
    p = ModelParams(0.5, 1.0)
    ics = scale_ics(p, [1.0, 10.0, 100.0])
    grid = [0.1, 1.0, 10.0]
    np.testing.assert_array_equal(bound_ratios(p, ics, grid, workers=1),
                                  bound_ratios(p, ics, grid, workers=2))


def test_scale_ics_modes():
    p = ModelParams(0.5, 1.0)
    for mode in ("position", "velocity", "random"):
        ics = scale_ics(p, [1.0, 1e4], mode, seed=3)
        assert [energy(p, s) for s in ics] == pytest.approx([1.0, 1e4], rel=1e-12)
    assert scale_ics(p, [3.0])[0] == pytest.approx((9.0 ** (1 / 3), 0.0))
    assert scale_ics(p, [2.0], "velocity")[0] == (0.0, 2.0)
    with pytest.raises(ValueError):
        scale_ics(p, [1.0], "diagonal")


# --- saturation sweeps ----------------------------------------------------------

def test_sweep_saturates_for_bounded_regime():
    p = ModelParams(0.5, 1.0)
    scales = 10.0 ** np.arange(0, 11)
    tight = sweep_initial_scale(p, 10.0, scales)
    assert tight.saturation_ratio <= 1.5
    # cross-check against a tighter tolerance
    tighter = sweep_initial_scale(p, 10.0, scales, IntegratorConfig(rel_tol=1e-11, abs_tol=1e-30))
    np.testing.assert_allclose(tight.e_at_tstar, tighter.e_at_tstar, rtol=1e-5)
    assert tight.scales == list(scales) and len(tight.e_at_tstar) == len(scales)


def test_sweep_grows_without_universal_bound():
    p = ModelParams(1.0, 0.0)
    short = sweep_initial_scale(p, 1.0, 10.0 ** np.arange(0, 5))
    long = sweep_initial_scale(p, 1.0, 10.0 ** np.arange(0, 9))
    assert short.saturation_ratio > 1.5
    assert long.saturation_ratio > short.saturation_ratio


def test_sweep_single_scale_and_validation():
    p = ModelParams(0.5, 1.0)
    assert sweep_initial_scale(p, 1.0, [5.0]).saturation_ratio == 1.0
    with pytest.raises(ValueError):
        sweep_initial_scale(p, 1.0, [10.0, 1.0])
    with pytest.raises(ValueError):
        sweep_initial_scale(p, 0.0, [1.0])


# --- blow-up ----------------------------------------------------------------------

@pytest.mark.parametrize("big_t, power", [(-3.0, -7.0), (-0.25, -10.0), (2.0, -2.0)])
def test_fit_blowup_exact_power_law(big_t, power):
    # backward run from 0 (or forward when T > 0) towards T with E = 5*|T-t|^power
    gaps = np.geomspace(abs(big_t), abs(big_t) * 1e-3, 400)
    times = big_t + np.sign(-big_t) * gaps
    t_blow, fit = fit_blowup(times, 5.0 * gaps ** power)
    assert t_blow == pytest.approx(big_t, rel=1e-6)
    assert fit.slope == pytest.approx(power, rel=1e-6)


def test_fit_blowup_needs_samples():
    with pytest.raises(ValueError):
        fit_blowup([0.0, -1.0, -1.5], [1.0, 10.0, 100.0])


def test_sub_critical_blowup_rate():
    rep = estimate_blowup(ModelParams(0.2, 1.0), (0.1, 0.0), 1e12)
    assert rep.rate_fit.slope == pytest.approx(-10.0, rel=0.15)
    assert math.isfinite(rep.t_blow) and rep.t_blow < rep.t_event < 0
    assert rep.threshold == 1e12 and rep.rate_fit.n_points >= 8


def test_super_critical_blowup_reports():
    # growth-rate sharpness is not asserted here, only well-formed output
    rep = estimate_blowup(ModelParams(0.5, 1.0), (0.1, 0.0), 1e12)
    assert rep.rate_fit.slope < 0 and math.isfinite(rep.t_blow)


def test_blowup_errors():
    p = ModelParams(0.2, 1.0)
    with pytest.raises(ValueError):
        estimate_blowup(p, (0.0, 0.0), 1e12)
    with pytest.raises(RegimeError):
        estimate_blowup(ModelParams(1.0, 0.5), (0.1, 0.0), 1e12)
    cfg = IntegratorConfig(direction=Direction.BACKWARD, max_steps=5)
    with pytest.raises(IntegrationError, match="no blow-up"):
        estimate_blowup(p, (0.1, 0.0), 1e12, cfg)


def test_blowup_forces_backward_direction():
    a = estimate_blowup(ModelParams(0.2, 1.0), (0.5, 0.0), 1e10, IntegratorConfig())
    assert a.t_event < 0
