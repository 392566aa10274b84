"""Closed-form decay rates and detector-induced reduction factors.

The vacuum decay rate is Gamma = 4 omega0^3 mu_a^2 / 3 (natural units), and
a detector atom at retarded distance z = omega0*r/c multiplies it by a
reduction factor U <= 1.  Several published variants of U exist and they are
*not* mutually consistent because of a normalization ambiguity in the
angular kernel; ``reduction_single`` therefore reports all of them side by
side together with a quadrature-oracle variant and their spread:

  u_general    1 - (9/64 pi^2) beta D^2        with the printed kernel D
  u_far_field  1 - (9/4) beta l^2 sin^2(z)/z^2 (z well into the wave zone)
  u_near_field 1 - beta (p_d.p_a)^2            (z -> 0 contact limit)
  u_oracle     1 - (9/64 pi^2) beta D_raw^2    with the raw spherical
               integral; this variant interpolates the far- and near-field
               limits exactly and matches the time-domain simulations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import (
    DipoleGeometry,
    TWO_PI,
    d_func,
    d_oracle,
    dipole_factor_l,
)
from .model import DetectorAtom, PhysicalSystem

#: Printed coefficient of the single-detector deficit.
DEFICIT_COEFF = 9.0 / (64.0 * math.pi**2)

#: Printed angular average of l^2 used by the spherical-shell formula.
L2_AVERAGE_PRINTED = 2.0 / 7.0

#: Isotropic average of l^2 for independent uniform orientations
#: (closed form; see geometry.angular_average_l2).
L2_AVERAGE_ISOTROPIC = 2.0 / 9.0

FAR_FIELD_THRESHOLD = TWO_PI
NEAR_FIELD_THRESHOLD = 0.1


def einstein_a(omega0: float, mu_a: float) -> float:
    """Vacuum decay rate 4 omega0^3 mu_a^2 / 3."""
    return 4.0 * omega0**3 * mu_a**2 / 3.0


def mu_a_from_gamma(omega0: float, gamma: float) -> float:
    """Exact inverse of einstein_a."""
    return math.sqrt(3.0 * gamma / (4.0 * omega0**3))


def beta_param(omega0: float, mu_c: float, rho0: float) -> float:
    """Detector response beta = 2 pi omega0^3 mu_c^2 rho(omega0) / 3."""
    if rho0 < 0.0:
        raise ValueError("rho0 must be >= 0")
    return TWO_PI * omega0**3 * mu_c**2 * rho0 / 3.0


@dataclass
class ReductionReport:
    """All reduction-factor variants for one geometry, plus diagnostics."""

    z: float
    beta: float
    l: float
    d_printed: float
    d_oracle_raw: float
    u_general: float
    u_far_field: float
    u_near_field: float
    u_oracle: float
    far_field_applicable: bool
    near_field_applicable: bool
    discrepancy: float
    #: d_oracle_raw / d_printed where d_printed is nonzero (else nan);
    #: constant only channel-by-channel, which is the point of reporting it.
    oracle_ratio: float = float("nan")


def reduction_single(geom: DipoleGeometry, beta: float,
                     far_threshold: float = FAR_FIELD_THRESHOLD,
                     near_threshold: float = NEAR_FIELD_THRESHOLD,
                     ) -> ReductionReport:
    """Reduction factor of a single detector atom, all variants."""
    if beta < 0.0:
        raise ValueError("beta must be >= 0")
    z = geom.z
    l = dipole_factor_l(geom.p_a, geom.p_d, geom.r_hat)
    dp = d_func(geom)
    draw = d_oracle(geom, normalization="raw")

    u_general = 1.0 - DEFICIT_COEFF * beta * dp * dp
    u_oracle = 1.0 - DEFICIT_COEFF * beta * draw * draw
    if z > 0.0:
        u_far = 1.0 - 2.25 * beta * (l * math.sin(z) / z) ** 2
    else:
        u_far = 1.0 - 2.25 * beta * l * l  # limit sin(z)/z -> 1
    cos_pd_pa = float(np.dot(geom.p_d, geom.p_a))
    u_near = 1.0 - beta * cos_pd_pa**2

    far_ok = z > far_threshold
    near_ok = z < near_threshold
    variants = [u_general, u_oracle]
    if far_ok:
        variants.append(u_far)
    if near_ok:
        variants.append(u_near)
    disc = max(abs(a - b) for a in variants for b in variants)

    ratio = draw / dp if dp != 0.0 else float("nan")
    return ReductionReport(
        z=z, beta=beta, l=l, d_printed=dp, d_oracle_raw=draw,
        u_general=u_general, u_far_field=u_far, u_near_field=u_near,
        u_oracle=u_oracle, far_field_applicable=far_ok,
        near_field_applicable=near_ok, discrepancy=disc, oracle_ratio=ratio,
    )


def reduction_multi(atoms: Sequence[DetectorAtom], p_a, beta: float,
                    omega0: float = 1.0) -> float:
    """Additive far-field reduction factor for many detector atoms.

    May drop below zero for N*beta large; that regime is reported as-is with
    a warning because it signals that neglecting inter-atom coupling is no
    longer valid, which clamping would hide.
    """
    if beta < 0.0:
        raise ValueError("beta must be >= 0")
    deficit = 0.0
    for atom in atoms:
        r = atom.r  # positions are in units of c/omega0, so z = r numerically
        if r == 0.0:
            raise ValueError("far-field formula is singular at r = 0")
        li = dipole_factor_l(p_a, atom.dipole_dir, atom.r_hat)
        deficit += (li * math.sin(r) / r) ** 2
    u = 1.0 - 2.25 * beta * deficit
    if u < 0.0:
        warnings.warn(
            "reduction factor below zero: additive single-atom deficits are "
            "outside their validity regime", stacklevel=2)
    return u


def reduction_shell(n_atoms: int, radius_z: float, beta: float,
                    l2_average: float = L2_AVERAGE_PRINTED) -> float:
    """Thin spherical shell of n_atoms at retarded radius radius_z.

    Uses the printed angular average 2/7 by default; pass
    L2_AVERAGE_ISOTROPIC for the independent-orientation value.
    """
    if n_atoms < 0:
        raise ValueError("n_atoms must be >= 0")
    if radius_z <= 0.0:
        raise ValueError("radius_z must be > 0")
    deficit = 2.25 * l2_average * beta * n_atoms * (
        math.sin(radius_z) / radius_z) ** 2
    return 1.0 - deficit


def shell_reduction_mc(n_atoms: int, radius_z: float, beta: float,
                       n_samples: int, seed: int | None = None,
                       ) -> tuple[float, float]:
    """Monte Carlo average of reduction_multi over uniform shell placements.

    Each sample draws n_atoms uniformly on the shell with independent uniform
    detector dipoles and a fixed emitter dipole.  Returns (mean, stderr).
    """
    rng = np.random.default_rng(seed)
    p_a = np.array([0.0, 0.0, 1.0])

    def unit(n):
        v = rng.normal(size=(n, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    sin_term = (math.sin(radius_z) / radius_z) ** 2
    values = np.empty(n_samples)
    for i in range(n_samples):
        r_hat = unit(n_atoms)
        p_d = unit(n_atoms)
        l = (p_d @ p_a) - (r_hat @ p_a) * np.sum(r_hat * p_d, axis=1)
        values[i] = 1.0 - 2.25 * beta * sin_term * float(np.sum(l * l))
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(n_samples))
    return mean, stderr


def survival_ww(t, gamma: float, u: float = 1.0):
    """Exponential survival probability exp(-gamma * u * t)."""
    if gamma < 0.0:
        raise ValueError("gamma must be >= 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("t must be >= 0")
    out = np.exp(-gamma * u * t)
    return float(out) if out.ndim == 0 else out


@dataclass
class RegimeReport:
    """Order-of-magnitude checks behind the closed-form approximations."""

    l_times_i: float
    mu_a_sq_i_over_omega0: float
    threshold: float
    flags: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.flags.values())


def magnitude_checks(system: PhysicalSystem,
                     threshold: float = 0.1) -> RegimeReport:
    """Dimensionless smallness ratios of the detector and atom couplings.

    L*I reduces to beta exactly at the pole evaluation point, and
    mu_a^2 I / omega0 reduces to gamma/2; both must be small for the
    denominator expansions to hold.
    """
    l_times_i = system.beta
    mu_ratio = 0.5 * system.gamma / system.omega0
    flags = {
        "l_times_i_small": l_times_i < threshold,
        "mu_a_sq_i_small": mu_ratio < threshold,
    }
    return RegimeReport(l_times_i=l_times_i,
                        mu_a_sq_i_over_omega0=mu_ratio,
                        threshold=threshold, flags=flags)


def normalization_report(beta: float,
                         z_values: Sequence[float] = (0.05, 10.0),
                         ) -> list[ReductionReport]:
    """Kernel-normalization discrepancy at reference distances.

    Uses the parallel-dipoles-perpendicular-to-separation geometry (l = 1)
    and returns one ReductionReport per z, carrying the printed/oracle kernel
    ratio and the spread among the U variants.
    """
    p_a = np.array([0.0, 0.0, 1.0])
    r_hat = np.array([1.0, 0.0, 0.0])
    reports = []
    for z in z_values:
        geom = DipoleGeometry(p_a=p_a, p_d=p_a, r_hat=r_hat, z=float(z))
        reports.append(reduction_single(geom, beta))
    return reports
