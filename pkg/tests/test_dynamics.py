import math

import numpy as np
import pytest

from watched_decay.discretize import (
    DiscreteModel,
    GridSpec,
    RecurrenceError,
    ToySpec,
    build_radial_vacuum,
    build_scalar_toy,
)
from watched_decay.dynamics import (
    AmplitudeState,
    DimensionError,
    FitWindowError,
    SolverSpec,
    Trajectory,
    derivative,
    fit_decay_rate,
    integrate,
)
from watched_decay.model import PhysicalSystem


def tiny_model(omegas, alphas, channel_omegas=(), channel_mu=(),
               factors=None, omega_a=0.0):
    omegas = np.asarray(omegas, dtype=float)
    alphas = np.asarray(alphas, dtype=complex)
    n_atoms = 1 if factors is not None else 0
    if factors is None:
        factors = np.zeros((omegas.size, 0), complex)
    else:
        factors = np.asarray(factors, complex).reshape(omegas.size, 1)
    return DiscreteModel(
        kind="scalar_toy", omega0=1.0, mode_omegas=omegas,
        mode_alphas=alphas, detector_factors=factors,
        channel_omegas=np.asarray(channel_omegas, dtype=float),
        channel_mu=np.asarray(channel_mu, dtype=float),
        t_rec=math.inf, meta={"gamma": 0.0}, omega_a=omega_a)


def random_model(rng, n_modes=7, n_channels=3):
    return tiny_model(
        omegas=rng.uniform(0.5, 1.5, n_modes),
        alphas=rng.normal(size=n_modes) + 1j * rng.normal(size=n_modes),
        channel_omegas=rng.uniform(0.4, 1.4, n_channels),
        channel_mu=rng.uniform(0.1, 0.5, n_channels),
        factors=rng.normal(size=n_modes) + 1j * rng.normal(size=n_modes))


def random_state(rng, model):
    y = rng.normal(size=model.size) + 1j * rng.normal(size=model.size)
    y /= np.linalg.norm(y)
    return AmplitudeState(
        a0=complex(y[0]), a_k=y[1:1 + model.n_modes],
        a_c=y[1 + model.n_modes:].reshape(model.n_atoms, model.n_channels))


# -- derivative ------------------------------------------------------------

def test_free_evolution_preserves_amplitude():
    model = tiny_model([1.3], [0.0])
    traj = integrate(model, 50.0)
    np.testing.assert_allclose(np.abs(traj.a0), 1.0, atol=1e-9)


def test_vacuum_rabi_oscillation():
    alpha = 0.02
    model = tiny_model([1.0], [alpha])
    t = np.linspace(0.0, 200.0, 400)
    traj = integrate(model, 200.0, t_eval=t)
    np.testing.assert_allclose(traj.survival, np.cos(alpha * t) ** 2,
                               atol=1e-7)


def test_derivative_is_anti_hermitian():
    rng = np.random.default_rng(5)
    for _ in range(25):
        model = random_model(rng)
        state = random_state(rng, model)
        dstate = derivative(state, model)
        inner = (np.conj(state.a0) * dstate.a0
                 + np.vdot(state.a_k, dstate.a_k)
                 + np.vdot(state.a_c, dstate.a_c))
        assert abs(inner.real) < 1e-14


def test_derivative_rotating_frame_shifts_diagonal_only():
    rng = np.random.default_rng(9)
    model = random_model(rng)
    state = random_state(rng, model)
    lab = derivative(state, model, rotating_frame=False)
    rot = derivative(state, model, rotating_frame=True)
    np.testing.assert_allclose(rot.a0, lab.a0 + 1j * state.a0, atol=1e-13)


def test_derivative_dimension_checks():
    model = tiny_model([1.0, 1.1], [0.1, 0.1])
    with pytest.raises(DimensionError):
        derivative(AmplitudeState(a0=1.0, a_k=np.zeros(3, complex),
                                  a_c=np.zeros((0, 0), complex)), model)
    with pytest.raises(DimensionError):
        derivative(AmplitudeState(a0=1.0, a_k=np.zeros(2, complex),
                                  a_c=np.zeros((1, 4), complex)), model)


# -- trajectories ----------------------------------------------------------

def test_trajectory_invariants():
    with pytest.raises(ValueError):
        Trajectory(times=np.array([0.0, 1.0]),
                   a0=np.array([0.5 + 0j, 0.4 + 0j]),
                   survival=np.array([0.25, 0.16]),
                   norm_drift=np.zeros(2))
    with pytest.raises(ValueError):
        Trajectory(times=np.array([0.0, 0.0]),
                   a0=np.ones(2, complex), survival=np.ones(2),
                   norm_drift=np.zeros(2))


def test_integrate_refuses_horizon_beyond_recurrence():
    model = build_scalar_toy(ToySpec())
    with pytest.raises(RecurrenceError):
        integrate(model, 2.0 * model.t_rec)


def test_rotating_frame_matches_lab_frame():
    model = build_scalar_toy(ToySpec(n_modes=80, n_channels=20))
    t = np.linspace(0.0, 40.0, 81)
    rot = integrate(model, 40.0, t_eval=t)
    lab = integrate(model, 40.0, t_eval=t,
                    solver=SolverSpec(rotating_frame=False, rtol=1e-10,
                                      atol=1e-13))
    np.testing.assert_allclose(rot.a0, lab.a0, atol=5e-7)


def test_norm_drift_within_tolerance():
    solver = SolverSpec()
    model = build_scalar_toy(ToySpec())
    traj = integrate(model, 100.0, solver=solver)
    assert np.max(np.abs(traj.norm_drift)) <= 100.0 * solver.rtol


def test_vacuum_survival_tracks_exponential():
    system = PhysicalSystem(gamma=0.01, omega_i=0.3, beta=0.0)
    model = build_radial_vacuum(system, GridSpec())
    traj = integrate(model, 200.0)
    # The pole residue renormalizes the amplitude by ~5%, so against the
    # bare exp(-gamma t) only an absolute few-percent bound holds...
    dev = np.abs(traj.survival - np.exp(-0.01 * traj.times))
    assert np.max(dev) < 0.07
    # ...while the dressed exponential (fitted amplitude and rate) tracks
    # the survival tightly once the onset transient has passed.
    late = traj.times >= 20.0
    slope, intercept = np.polyfit(traj.times[late],
                                  np.log(traj.survival[late]), 1)
    dressed = np.exp(intercept + slope * traj.times[late])
    assert np.max(np.abs(traj.survival[late] - dressed)) < 5e-3


# -- rate fitting ----------------------------------------------------------

def synthetic_trajectory(rate, t_end=300.0, n=301):
    t = np.linspace(0.0, t_end, n)
    a0 = np.exp(-0.5 * rate * t) * np.exp(-1j * t)
    return Trajectory(times=t, a0=a0, survival=np.abs(a0) ** 2,
                      norm_drift=np.zeros(n))


def test_fit_recovers_exact_exponential():
    fit = fit_decay_rate(synthetic_trajectory(0.0123),
                         gamma_expected=0.0123)
    assert fit.rate == pytest.approx(0.0123, rel=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.stderr < 1e-12


def test_fit_default_window_skips_onset():
    fit = fit_decay_rate(synthetic_trajectory(0.01), gamma_expected=0.01)
    t_lo, t_hi = fit.window
    assert t_lo == pytest.approx(20.0)
    assert t_hi == pytest.approx(240.0)


def test_fit_window_errors():
    traj = synthetic_trajectory(0.01)
    with pytest.raises(FitWindowError):
        fit_decay_rate(traj, window=(10.0, 5.0))
    with pytest.raises(FitWindowError):
        fit_decay_rate(traj, window=(299.5, 300.0))
