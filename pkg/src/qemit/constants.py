"""Physical constants and unit conversions.

Every constant used in the package lives here. Values come from
``scipy.constants`` (CODATA). Internal units are eV, Angstrom, amu, fs
and degrees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.constants as sc


@dataclass(frozen=True)
class UnitsLedger:
    hbar: float  # eV fs
    c: float  # Angstrom / fs
    eV_nm: float  # eV nm
    e: float  # C
    eps0: float  # F / m
    amu: float  # kg
    m_e: float  # kg
    angstrom: float  # m
    fs: float  # s
    # SI values kept for lifetime evaluation
    hbar_si: float
    c_si: float
    h: float


UNITS = UnitsLedger(
    hbar=sc.hbar / sc.e / sc.femto,
    c=sc.c / sc.angstrom * sc.femto,
    eV_nm=sc.h * sc.c / sc.e / sc.nano,
    e=sc.e,
    eps0=sc.epsilon_0,
    amu=sc.atomic_mass,
    m_e=sc.m_e,
    angstrom=sc.angstrom,
    fs=sc.femto,
    hbar_si=sc.hbar,
    c_si=sc.c,
    h=sc.h,
)

#: s_k = HR_CONSTANT * hbar_omega[meV] * q_k^2[amu A^2]; equals 1e-3 e amu A^2 / (2 hbar^2)
HR_CONSTANT = 1e-3 * sc.e * sc.atomic_mass * sc.angstrom**2 / (2.0 * sc.hbar**2)

#: hbar^2 / m_e in eV A^2, used to turn the momentum sum into a dipole length
HBAR2_OVER_ME = sc.hbar**2 / sc.m_e / sc.e / sc.angstrom**2

#: e^2 / (4 pi eps0) in eV A
COULOMB_EV_A = sc.e / (4.0 * np.pi * sc.epsilon_0) / sc.angstrom

#: 1 Debye in e A
DEBYE_E_A = 1e-21 / sc.c / sc.e / sc.angstrom

THZ_TO_MEV = sc.h * 1e12 / sc.e * 1e3


def energy_to_wavelength(e_ev):
    """Photon energy (eV) to vacuum wavelength (nm)."""
    e_ev = np.asarray(e_ev, dtype=float)
    if np.any(e_ev <= 0):
        raise ValueError(f"photon energy must be positive, got {e_ev}")
    out = UNITS.eV_nm / e_ev
    return float(out) if out.ndim == 0 else out


def wavelength_to_energy(nm):
    """Vacuum wavelength (nm) to photon energy (eV)."""
    nm = np.asarray(nm, dtype=float)
    if np.any(nm <= 0):
        raise ValueError(f"wavelength must be positive, got {nm}")
    out = UNITS.eV_nm / nm
    return float(out) if out.ndim == 0 else out


# the operation name used in the public interface
convert_energy_wavelength = energy_to_wavelength


def mev_to_rad_per_fs(mev):
    return np.asarray(mev, dtype=float) * 1e-3 / UNITS.hbar


def rad_per_fs_to_mev(omega):
    return np.asarray(omega, dtype=float) * UNITS.hbar * 1e3


def thz_to_mev(f_thz):
    return np.asarray(f_thz, dtype=float) * THZ_TO_MEV
