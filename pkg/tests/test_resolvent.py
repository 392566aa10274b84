import math

import numpy as np
import pytest

from watched_decay.discretize import (
    DiscreteModel,
    GridSpec,
    ToySpec,
    build_radial_vacuum,
    build_scalar_toy,
)
from watched_decay.geometry import DipoleGeometry, dipole_factor_l
from watched_decay.model import PhysicalSystem
from watched_decay.resolvent import (
    ContourSpec,
    InversionError,
    KernelValues,
    PoleError,
    PropagatorSet,
    RegimeError,
    invert_laplace,
    k_discrete,
    kernels_continuum,
    resolvent_a0_dense,
    resolvent_a0_discrete,
    self_energy,
    u_discrete,
    ww_pole,
    ww_pole_kernels,
)

ZHAT = np.array([0.0, 0.0, 1.0])
XHAT = np.array([1.0, 0.0, 0.0])


def vacuum_system(gamma=0.01):
    return PhysicalSystem(gamma=gamma, omega_i=0.3, beta=0.0)


def empty_model(omega0=1.0):
    return DiscreteModel(
        kind="radial1d", omega0=omega0, mode_omegas=np.empty(0),
        mode_alphas=np.empty(0, complex),
        detector_factors=np.empty((0, 0), complex),
        channel_omegas=np.empty(0), channel_mu=np.empty(0),
        t_rec=math.inf, meta={"gamma": 0.0})


# -- propagator sums -------------------------------------------------------

def test_k_discrete_empty_model():
    assert k_discrete(1.0 + 0.0j, empty_model()) == 0.0


def test_k_discrete_single_mode():
    model = DiscreteModel(
        kind="radial1d", omega0=1.0, mode_omegas=np.array([1.0]),
        mode_alphas=np.array([0.1 + 0.0j]),
        detector_factors=np.empty((1, 0), complex),
        channel_omegas=np.empty(0), channel_mu=np.empty(0),
        t_rec=math.inf, meta={"gamma": 0.0})
    assert k_discrete(1.0 + 0.0j, model) == pytest.approx(
        0.005 - 0.005j, abs=1e-15)


def test_k_discrete_pole_detection():
    model = build_scalar_toy(ToySpec())
    with pytest.raises(PoleError):
        k_discrete(-1j * model.mode_omegas[3], model)


def test_k_discrete_continuum_limit():
    # Re K(-i omega0 + Gamma) approaches the cutoff Lorentzian integral;
    # the omega^3 wings inflate it above the ideal Gamma/2 by ~6% at this
    # evaluation width.
    from scipy.integrate import quad
    model = build_radial_vacuum(vacuum_system(), GridSpec())
    k = k_discrete(-1j + 0.01, model)
    coeff = 0.01 / (2.0 * math.pi)
    ref = quad(lambda w: coeff * w**3 * 0.01 / (0.01**2 + (w - 1.0) ** 2),
               0.0, 4.0, limit=400, points=[1.0])[0]
    assert k.real == pytest.approx(ref, rel=1e-6)
    assert k.real == pytest.approx(0.005, rel=0.07)


def test_propagator_set_consistency():
    model = build_scalar_toy(ToySpec(n_modes=40, n_channels=8))
    props = PropagatorSet(model)
    s = 0.2 + 0.5j
    assert props.k(s) == pytest.approx(k_discrete(s, model), abs=1e-15)
    m_ac = props.m_ac(s)
    m_ca = props.m_ca(s)
    n_cc = props.n_cc(s)
    assert m_ac.shape == (1, 8)
    assert n_cc.shape == (8, 8)
    # N factorizes through the same G kernel that the rank-one solve uses.
    assert np.linalg.matrix_rank(n_cc, tol=1e-12) == 1
    # L sum and direct evaluation agree.
    assert props.l(s) == pytest.approx(
        np.sum(model.channel_mu**2 / (s + 1j * model.channel_omegas)),
        abs=1e-15)
    assert np.all(np.isfinite(m_ac))
    assert np.all(np.isfinite(m_ca))


# -- resolvent -------------------------------------------------------------

def test_resolvent_free_limit():
    s = 0.5 + 2.0j
    assert resolvent_a0_discrete(s, empty_model()) == pytest.approx(
        1.0 / (s + 1.0j), abs=1e-15)


def test_resolvent_vacuum_matches_ww_form():
    model = build_radial_vacuum(vacuum_system(), GridSpec(),
                                renormalize_shift=False)
    s = 0.1 + 0.3j
    expected = 1.0 / (s + 1.0j + k_discrete(s, model))
    assert resolvent_a0_discrete(s, model) == pytest.approx(
        expected, abs=1e-15)


def test_dense_and_woodbury_paths_agree():
    model = build_scalar_toy(ToySpec(n_modes=60, n_channels=15, r=1.3))
    for s in (0.5 + 0.0j, 0.01 - 1.0j + 0.02, 2.0 + 3.0j, 0.1 - 0.6j):
        a = resolvent_a0_discrete(s, model)
        b = resolvent_a0_dense(s, model)
        assert a == pytest.approx(b, rel=1e-12)


def test_initial_value_theorem():
    model = build_scalar_toy(ToySpec())
    for s in (1e4, 1e6, 1e8):
        assert abs(s * resolvent_a0_discrete(s + 0.0j, model) - 1.0) < 2.0 / s


def test_pole_free_right_half_plane():
    model = build_scalar_toy(ToySpec(n_modes=60, n_channels=15))
    rng = np.random.default_rng(2)
    s = 1e-6 + rng.uniform(0, 2, 64) + 1j * rng.uniform(-3, 3, 64)
    vals = resolvent_a0_discrete(s, model)
    assert np.all(np.isfinite(vals))


def test_self_energy_reduces_to_k_without_channels():
    model = build_radial_vacuum(vacuum_system(), GridSpec())
    s = 0.2 + 0.4j
    assert self_energy(s, model) == k_discrete(s, model)


def test_u_discrete_below_one_with_detector():
    model = build_scalar_toy(ToySpec())
    s0 = -1.0j + 0.01
    u = u_discrete(s0, model)
    assert 0.9 < u.real < 1.0


# -- continuum kernels -----------------------------------------------------

def perp_geom(z):
    return DipoleGeometry(p_a=ZHAT, p_d=ZHAT, r_hat=XHAT, z=z)


def test_ww_kernels_reference_values():
    system = PhysicalSystem(gamma=0.01, omega_i=0.3, beta=0.05)
    kv = kernels_continuum(-1.0j, perp_geom(1.0), system)
    assert kv.i == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert kv.l == pytest.approx(math.pi * system.mu_c_sq_rho0, abs=1e-15)


def test_ww_kernels_vacuum_u_is_one():
    system = PhysicalSystem(gamma=0.01, omega_i=0.3, beta=0.0)
    kv = kernels_continuum(-1.0j, perp_geom(2.0), system)
    assert kv.u == pytest.approx(1.0, abs=1e-15)


def test_ww_u_matches_analytic_deficit():
    from watched_decay.analytic import reduction_single
    system = PhysicalSystem(gamma=0.01, omega_i=0.3, beta=0.05)
    for z in (0.3, 1.7, 6.0):
        kv = kernels_continuum(-1.0j, perp_geom(z), system,
                               d_variant="printed")
        rep = reduction_single(perp_geom(z), 0.05)
        assert kv.u.real == pytest.approx(rep.u_general, abs=1e-12)
        kv_o = kernels_continuum(-1.0j, perp_geom(z), system,
                                 d_variant="oracle")
        assert kv_o.u.real == pytest.approx(rep.u_oracle, abs=1e-10)


def test_quadrature_kernels_approach_ww_values():
    system = PhysicalSystem(gamma=0.01, omega_i=0.3, beta=0.05)
    kv = kernels_continuum(-1.0j + 0.005, perp_geom(0.0), system,
                           mode="quadrature")
    # Lorentzian-smoothed resonance values: real parts approach the WW
    # ones, inflated by the off-resonant wings of the cutoff integrals.
    assert kv.i.real == pytest.approx(2.0 / 3.0, rel=0.05)
    assert kv.l.real == pytest.approx(math.pi * system.mu_c_sq_rho0,
                                      rel=0.05)


def test_keep_shift_reports_principal_values():
    system = PhysicalSystem(gamma=0.01, omega_i=0.3, beta=0.05)
    plain = kernels_continuum(-1.0j, perp_geom(1.0), system)
    shifted = kernels_continuum(-1.0j, perp_geom(1.0), system,
                                keep_shift=True)
    assert plain.i.imag == 0.0
    assert shifted.i.imag != 0.0
    assert shifted.i.real == plain.i.real


# -- pole approximation ----------------------------------------------------

def test_ww_pole_vacuum_rate():
    model = build_radial_vacuum(vacuum_system(), GridSpec())
    pole = ww_pole(model)
    assert pole["u"] == pytest.approx(1.0, abs=1e-12)
    # The raw rate carries an O(gamma_eval) wing bias from the omega^3
    # profile; the ratio u cancels it.
    assert pole["rate"] == pytest.approx(0.01, rel=0.10)


def test_ww_pole_rate_converges_with_evaluation_width():
    model = build_radial_vacuum(vacuum_system(),
                                GridSpec(n_modes=3200, scheme="uniform"))
    coarse = ww_pole(model, gamma_eval=0.01)["rate"]
    fine = ww_pole(model, gamma_eval=0.003)["rate"]
    assert abs(fine - 0.01) < abs(coarse - 0.01)
    assert fine == pytest.approx(0.01, rel=0.03)


def test_ww_pole_toy_slowing():
    model = build_scalar_toy(ToySpec())
    pole = ww_pole(model)
    assert pole["rate"] < pole["vacuum_rate"]
    assert 0.9 < pole["u"] < 1.0


def test_ww_pole_regime_enforcement():
    system = PhysicalSystem(gamma=0.2, omega_i=0.3, beta=0.0)
    model = build_radial_vacuum(system, GridSpec(), enforce_sum_rule=False)
    with pytest.raises(RegimeError):
        ww_pole(model)
    ww_pole(model, enforce_regime=False)


def test_ww_pole_kernels_vacuum_and_node():
    system = PhysicalSystem(gamma=0.01, omega_i=0.3, beta=0.0)
    pole = ww_pole_kernels(perp_geom(1.0), system)
    assert pole["rate"] == pytest.approx(0.01, rel=1e-12)
    # At a far-field node the oracle-kernel rate returns to Gamma.
    system_d = PhysicalSystem(gamma=0.01, omega_i=0.3, beta=0.05)
    node = ww_pole_kernels(perp_geom(40.0 * math.pi), system_d)
    assert node["u"] == pytest.approx(1.0, abs=1e-4)


def test_ww_pole_kernels_far_field_consistency():
    system = PhysicalSystem(gamma=0.01, omega_i=0.3, beta=0.05)
    z = 60.0 * math.pi + 1.0
    geom = perp_geom(z)
    pole = ww_pole_kernels(geom, system)
    l = dipole_factor_l(geom.p_a, geom.p_d, geom.r_hat)
    u_far = 1.0 - 2.25 * 0.05 * (l * math.sin(z) / z) ** 2
    assert pole["rate"] == pytest.approx(0.01 * u_far, rel=1e-6)


# -- inverse transform -----------------------------------------------------

def test_invert_known_oscillator():
    t = np.linspace(0.0, 20.0, 81)
    vals, info = invert_laplace(lambda s: 1.0 / (s + 1.0j), t)
    np.testing.assert_allclose(np.abs(vals), 1.0, atol=1e-8)
    np.testing.assert_allclose(vals, np.exp(-1.0j * t), atol=1e-8)
    assert info["error_estimate"] < 1e-6


def test_invert_known_decay():
    t = np.linspace(0.0, 50.0, 51)
    vals, _ = invert_laplace(lambda s: 1.0 / (s + 0.01), t)
    np.testing.assert_allclose(vals.real, np.exp(-0.01 * t), atol=1e-8)
    np.testing.assert_allclose(vals.imag, 0.0, atol=1e-8)


def test_invert_two_pole_cosine():
    omega = 0.7
    t = np.linspace(0.0, 30.0, 61)
    vals, _ = invert_laplace(lambda s: s / (s**2 + omega**2), t)
    np.testing.assert_allclose(vals.real, np.cos(omega * t), atol=1e-8)


def test_invert_talbot_smooth_transform():
    t = np.linspace(0.1, 30.0, 30)
    vals, _ = invert_laplace(lambda s: 1.0 / (s + 0.05),
                             t, ContourSpec(kind="talbot"))
    # The fixed-shape contour tightens around the pole at late times, so
    # the accuracy is a few orders below the Bromwich default.
    np.testing.assert_allclose(vals.real, np.exp(-0.05 * t), atol=1e-4)


def test_invert_value_at_zero_is_initial_value():
    vals, _ = invert_laplace(lambda s: 1.0 / (s + 1.0j),
                             np.array([0.0, 1.0]))
    assert vals[0] == pytest.approx(1.0, abs=1e-8)


def test_inversion_self_check_raises_when_starved():
    # Two-pole transform defeats the analytic reference subtraction, so a
    # severely truncated contour must fail its own error estimate.
    contour = ContourSpec(max_nodes=128, strict=True)
    with pytest.raises(InversionError):
        invert_laplace(lambda s: s / (s**2 + 1.0),
                       np.linspace(0.0, 20.0, 21), contour)


def test_invert_rejects_negative_time():
    with pytest.raises(ValueError):
        invert_laplace(lambda s: 1.0 / s, np.array([-1.0]))


def test_kernel_values_container():
    kv = KernelValues(i=1.0, j=0.5, l=0.1, u=0.9)
    assert kv.u == 0.9
