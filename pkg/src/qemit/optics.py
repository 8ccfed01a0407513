"""Transition dipoles from plane-wave orbitals, dipole orientation and radiative lifetimes."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constants import HBAR2_OVER_ME, UNITS
from .model import PlanewaveOrbital, TransitionDipole

log = logging.getLogger(__name__)

DEGENERACY_GUARD_EV = 1e-3
KPOINT_TOL = 1e-8


class OpticsError(ValueError):
    pass


def _aligned_coefficients(f: PlanewaveOrbital, i: PlanewaveOrbital):
    """Both coefficient sets on the union of G-vectors (missing entries are zero)."""
    keys_f = {tuple(g): n for n, g in enumerate(np.round(f.gvectors, 8))}
    keys_i = {tuple(g): n for n, g in enumerate(np.round(i.gvectors, 8))}
    union = sorted(set(keys_f) | set(keys_i))
    cf = np.zeros(len(union), dtype=complex)
    ci = np.zeros(len(union), dtype=complex)
    g = np.empty((len(union), 3))
    for n, key in enumerate(union):
        if key in keys_f:
            cf[n] = f.coefficients[keys_f[key]]
            g[n] = f.gvectors[keys_f[key]]
        if key in keys_i:
            ci[n] = i.coefficients[keys_i[key]]
            g[n] = i.gvectors[keys_i[key]]
    return g, cf, ci


def momentum_sum(f: PlanewaveOrbital, i: PlanewaveOrbital) -> np.ndarray:
    """sum_G c_f*(G) (k + G) c_i(G), in 1/A."""
    if np.max(np.abs(f.kpoint - i.kpoint)) > KPOINT_TOL:
        raise OpticsError(f"k-points differ: {f.kpoint} vs {i.kpoint}")
    g, cf, ci = _aligned_coefficients(f, i)
    kg = g + f.kpoint
    return (np.conj(cf) * ci) @ kg


def momentum_matrix_element(f: PlanewaveOrbital, i: PlanewaveOrbital) -> np.ndarray:
    """<psi_f| p |psi_i> = hbar sum_G c_f*(G) (k+G) c_i(G), in eV fs / A."""
    return UNITS.hbar * momentum_sum(f, i)


def transition_dipole(f: PlanewaveOrbital, i: PlanewaveOrbital, kind: str = "emission") -> TransitionDipole:
    """mu = i hbar / ((E_f - E_i) m_e) <f|p|i>, returned in e A.

    Excitation dipoles are built from ground-state orbitals, emission dipoles from
    excited-state orbitals; the caller picks which files to pass.
    """
    de = f.energy - i.energy
    if abs(de) <= DEGENERACY_GUARD_EV:
        raise OpticsError(
            f"orbital energies differ by {de * 1e3:.3f} meV, below the {DEGENERACY_GUARD_EV * 1e3:g} meV guard"
        )
    mu = 1j * HBAR2_OVER_ME / de * momentum_sum(f, i)
    dip = TransitionDipole(mu, kind)
    if dip.r == 0.0:
        log.warning("vanishing %s dipole: orientation undefined", kind)
    return dip


def spherical_to_cartesian(r: float, theta_deg: float, phi_deg: float) -> np.ndarray:
    t, p = np.radians(theta_deg), np.radians(phi_deg)
    return r * np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])


def misalignment(ex: TransitionDipole, em: TransitionDipole) -> float:
    """Angle in degrees (0..90) between the modulus-built orientations of two dipoles."""
    if ex.r == 0.0 or em.r == 0.0:
        raise OpticsError("misalignment undefined for a vanishing dipole")
    c = abs(float(ex.orientation @ em.orientation))
    return float(np.degrees(np.arccos(min(c, 1.0))))


@dataclass(frozen=True)
class RadiativeResult:
    rate: Optional[float]  # 1/ns
    lifetime_ns: Optional[float]
    zpl: float
    mu_sq: float  # (e A)^2
    n_D: float
    note: str = ""

    def __post_init__(self):
        if self.rate is not None and not self.rate > 0:
            raise ValueError("radiative rate must be positive")


def radiative_rate_si(zpl_ev: float, mu_sq: float, n_D: float) -> float:
    """Gamma_R = n_D e^2 E0^3 mu^2 / (3 pi eps0 hbar^4 c^3) in 1/s, with mu in A."""
    e0 = zpl_ev * UNITS.e
    mu2 = mu_sq * UNITS.angstrom**2
    return n_D * UNITS.e**2 * e0**3 * mu2 / (3.0 * np.pi * UNITS.eps0 * UNITS.hbar_si**4 * UNITS.c_si**3)


def radiative_lifetime(zpl: float, mu_sq: float, n_D: float) -> RadiativeResult:
    if not zpl > 0:
        raise OpticsError("ZPL energy must be positive")
    if mu_sq < 0:
        raise OpticsError("squared dipole must be nonnegative")
    if not n_D > 1:
        raise OpticsError(f"refractive index must exceed 1, got {n_D}")
    if mu_sq == 0:
        log.warning("zero transition dipole: radiative lifetime is infinite")
        return RadiativeResult(None, None, zpl, 0.0, n_D, "dipole-forbidden (mu = 0)")
    rate = radiative_rate_si(zpl, mu_sq, n_D) * 1e-9
    return RadiativeResult(rate, 1.0 / rate, zpl, mu_sq, n_D)


def dipole_from_lifetime(zpl: float, lifetime_ns: float, n_D: float) -> float:
    """Invert the rate expression: squared dipole (e A)^2 giving ``lifetime_ns``."""
    if lifetime_ns <= 0:
        raise OpticsError("lifetime must be positive")
    unit_rate = radiative_rate_si(zpl, 1.0, n_D) * 1e-9
    return 1.0 / (lifetime_ns * unit_rate)
