"""Configuration coordinates, Huang-Rhys factors and T = 0 photoluminescence lineshapes.

Pipeline: ``displacement`` -> ``project_modes`` -> ``spectral_function`` ->
``generating_lineshape``. Energies inside the pipeline are meV, times fs;
the final spectrum is on a photon-energy grid in eV.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import ndtr, voigt_profile

from .constants import HR_CONSTANT, UNITS
from .model import CrystalStructure, PhononModeSet, Spectrum

log = logging.getLogger(__name__)

HBAR_MEV_FS = UNITS.hbar * 1e3
SUM_RULE_TRUNCATION = 1e-3


class LineshapeError(ValueError):
    pass


class GridTooNarrow(LineshapeError):
    pass


class TimeGridError(LineshapeError):
    pass


@dataclass(frozen=True)
class ModeProjection:
    mode_index: int
    hbar_omega: float  # meV
    q_k: float  # amu^1/2 A
    s_k: float

    def __post_init__(self):
        if self.s_k < 0:
            raise ValueError("partial Huang-Rhys factor must be nonnegative")
        if self.hbar_omega <= 0 and self.s_k != 0:
            raise ValueError("soft or zero-frequency modes carry s_k = 0")


@dataclass(frozen=True)
class HuangRhysSummary:
    projections: tuple
    S_total: float
    deltaQ: float
    dw: float


@dataclass(frozen=True)
class SpectralFunction:
    """Gaussian-smeared S(hbar omega) in 1/meV on a uniform grid starting at ``energies[0]``."""

    energies: np.ndarray  # meV
    values: np.ndarray  # 1/meV
    sigma_meV: float
    max_phonon_meV: float

    @property
    def step(self) -> float:
        return float(self.energies[1] - self.energies[0])

    def integral(self) -> float:
        return float(trapezoid(self.values, self.energies))


def displacement(ground: CrystalStructure, excited: CrystalStructure, tol: float = 1e-6) -> np.ndarray:
    """R_excited - R_ground per atom (A), each component taken to the nearest periodic image."""
    if ground.natoms != excited.natoms:
        raise ValueError(f"atom counts differ: {ground.natoms} vs {excited.natoms}")
    if ground.species != excited.species:
        raise ValueError("species order differs between ground and excited structures")
    if np.max(np.abs(ground.lattice - excited.lattice)) > tol:
        raise ValueError("ground and excited structures have different lattices")
    dfrac = excited.fractional() - ground.fractional()
    dfrac -= np.round(dfrac)
    return dfrac @ ground.lattice


def mass_weighted_deltaQ(dR, masses) -> float:
    """sqrt(sum_a m_a |dR_a|^2) in amu^1/2 A."""
    dR = np.asarray(dR, dtype=float)
    masses = np.asarray(masses, dtype=float)
    if dR.shape != (masses.size, 3):
        raise ValueError(f"displacements {dR.shape} do not match {masses.size} masses")
    return float(np.sqrt(np.sum(masses[:, None] * dR**2)))


def mass_weighted_eigenvectors(modes: PhononModeSet, masses) -> np.ndarray:
    """Mode vectors in the mass-weighted (dynamical-matrix) convention, shape (3N, 3N)."""
    vecs = modes.eigenvectors.reshape(modes.nmodes, modes.natoms, 3)
    if not modes.mass_weighted:
        vecs = vecs * np.sqrt(np.asarray(masses, dtype=float))[None, :, None]
    flat = vecs.reshape(modes.nmodes, -1)
    return flat / np.linalg.norm(flat, axis=1, keepdims=True)


def translational_modes(modes: PhononModeSet, masses) -> list:
    """Indices of the three modes lying closest to rigid translations."""
    m = np.sqrt(np.asarray(masses, dtype=float))
    trans = np.zeros((3, modes.natoms, 3))
    for i in range(3):
        trans[i, :, i] = m
    trans = trans.reshape(3, -1) / np.linalg.norm(m)
    weight = np.sum((mass_weighted_eigenvectors(modes, masses) @ trans.T) ** 2, axis=1)
    return sorted(np.argsort(-weight, kind="stable")[:3].tolist())


def project_modes(dR, masses, modes: PhononModeSet, exclude=()) -> list:
    """q_k = sum sqrt(m_a) dR_ai e_k,ai and s_k = omega_k q_k^2 / (2 hbar).

    Modes with hbar_omega <= 0 and modes listed in ``exclude`` get s_k = 0.
    """
    dR = np.asarray(dR, dtype=float)
    masses = np.asarray(masses, dtype=float)
    if modes.natoms != masses.size or dR.shape != (masses.size, 3):
        raise ValueError(
            f"mode set has {modes.natoms} atoms, displacement {dR.shape}, masses {masses.size}"
        )
    vecs = mass_weighted_eigenvectors(modes, masses)
    weighted = (np.sqrt(masses)[:, None] * dR).ravel()
    qk = vecs @ weighted
    soft = np.flatnonzero(modes.frequencies < 0)
    if soft.size:
        log.warning("%d imaginary mode(s) excluded from the Huang-Rhys sum", soft.size)
    skip = set(int(i) for i in exclude)
    out = []
    for k, (w, q) in enumerate(zip(modes.frequencies, qk)):
        s = HR_CONSTANT * w * q * q if (w > 0 and k not in skip) else 0.0
        out.append(ModeProjection(k, float(w), float(q), float(s)))
    return out


def hr_summary(projections, deltaQ: float) -> HuangRhysSummary:
    S = float(sum(p.s_k for p in projections))
    return HuangRhysSummary(tuple(projections), S, float(deltaQ), float(np.exp(-S)))


def phonon_grid(projections, step_meV: float = 0.5, sigma_meV: float = 3.0) -> np.ndarray:
    """Energy grid from 0 to max(hbar omega) + 6 sigma."""
    top = max([p.hbar_omega for p in projections if p.s_k > 0] or [0.0])
    n = int(np.ceil((top + 6.0 * sigma_meV) / step_meV)) + 1
    return np.arange(n) * step_meV


def spectral_function(projections, grid, sigma_meV: float = 3.0) -> SpectralFunction:
    """S(hbar omega) with each delta replaced by a unit-area Gaussian of width ``sigma_meV``."""
    if sigma_meV <= 0:
        raise ValueError("smearing width must be positive")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("energy grid needs at least two points")
    step = np.diff(grid)
    if np.any(step <= 0) or np.ptp(step) > 1e-9 * step[0]:
        raise ValueError("energy grid must be uniform and increasing")
    active = [p for p in projections if p.s_k > 0]
    values = np.zeros_like(grid)
    if not active:
        return SpectralFunction(grid, values, sigma_meV, 0.0)
    w = np.array([p.hbar_omega for p in active])
    s = np.array([p.s_k for p in active])
    lost = s * (ndtr((grid[0] - w) / sigma_meV) + ndtr((w - grid[-1]) / sigma_meV))
    if lost.sum() > SUM_RULE_TRUNCATION * s.sum():
        raise GridTooNarrow(
            f"grid [{grid[0]}, {grid[-1]}] meV truncates {lost.sum() / s.sum():.2e} of the "
            "Huang-Rhys sum rule"
        )
    norm = 1.0 / (np.sqrt(2.0 * np.pi) * sigma_meV)
    for wk, sk in zip(w, s):
        values += sk * norm * np.exp(-0.5 * ((grid - wk) / sigma_meV) ** 2)
    return SpectralFunction(grid, values, sigma_meV, float(w.max()))


def time_function(sf: SpectralFunction, t) -> np.ndarray:
    """S(t) = int S(E) exp(-i E t / hbar) dE by trapezoidal quadrature on the grid."""
    t = np.asarray(t, dtype=float)
    weights = sf.values * sf.step
    weights = weights.copy()
    weights[0] *= 0.5
    weights[-1] *= 0.5
    z = np.exp(-1j * sf.step * t / HBAR_MEV_FS)
    # Horner evaluation of sum_j w_j z^j
    acc = np.zeros_like(z)
    for wj in weights[::-1]:
        acc = acc * z + wj
    return acc * np.exp(-1j * sf.energies[0] * t / HBAR_MEV_FS)


def default_t_max(sf: SpectralFunction, gamma_meV: float) -> float:
    """20 hbar/gamma, capped below the recurrence period 2 pi hbar / dE of the gridded S(t)."""
    t = 20.0 * HBAR_MEV_FS / gamma_meV
    return min(t, 0.95 * 2.0 * np.pi * HBAR_MEV_FS / sf.step)


def generating_lineshape(
    sf: SpectralFunction,
    zpl: float,
    gamma_meV: float = 1.0,
    t_max: float | None = None,
    n_t: int = 2**16,
    below_eV: float = 0.6,
    above_eV: float = 0.1,
) -> Spectrum:
    """Emission lineshape L = omega^3 A from the generating function G(t) = exp[S(t) - S(0)].

    A(E_zpl - eps) = 1/(2 pi hbar) int G(t) exp(i eps t / hbar - gamma |t| / hbar) dt, so
    phonon replicas sit at eps = n hbar omega_k below the ZPL. ``t_max`` is in fs; the
    returned grid spans [zpl - below_eV, zpl + above_eV] with spacing pi hbar / t_max.
    """
    if gamma_meV <= 0:
        raise ValueError("gamma must be positive")
    if zpl <= 0:
        raise ValueError("ZPL energy must be positive")
    if n_t < 16 or n_t % 2:
        raise ValueError("n_t must be an even number of time points")
    if t_max is None:
        t_max = default_t_max(sf, gamma_meV)
    if t_max < 10.0 * HBAR_MEV_FS / gamma_meV * (1 - 1e-12):
        raise TimeGridError(
            f"t_max = {t_max:.1f} fs is shorter than 10 hbar/gamma = {10 * HBAR_MEV_FS / gamma_meV:.1f} fs"
            " (refine the phonon energy grid if the recurrence cap forced this)"
        )
    period = 2.0 * np.pi * HBAR_MEV_FS / sf.step
    if t_max >= period:
        raise TimeGridError(
            f"t_max = {t_max:.1f} fs reaches the recurrence period {period:.1f} fs of the "
            f"{sf.step} meV phonon grid"
        )
    dt = 2.0 * t_max / n_t
    if sf.max_phonon_meV > 0 and dt > np.pi * HBAR_MEV_FS / (4.0 * sf.max_phonon_meV):
        raise TimeGridError(
            f"time step {dt:.3f} fs does not resolve the {sf.max_phonon_meV:.1f} meV phonon"
        )

    half = n_t // 2
    t_pos = np.arange(half + 1) * dt
    s_t = time_function(sf, t_pos)
    s0 = float(np.real(s_t[0]))
    g_pos = np.exp(s_t - s0) * np.exp(-gamma_meV * t_pos / HBAR_MEV_FS)
    # full grid t_n = (n - N/2) dt, using f(-t) = conj f(t)
    f = np.empty(n_t, dtype=complex)
    f[half:] = g_pos[:half]
    f[:half] = np.conj(g_pos[1 : half + 1][::-1])
    m = np.fft.fftfreq(n_t, d=1.0 / n_t).astype(int)
    sign = np.where(m % 2 == 0, 1.0, -1.0)
    a_eps = np.real(np.fft.ifft(f) * sign) * n_t * dt / (2.0 * np.pi * HBAR_MEV_FS)  # 1/meV
    d_eps = 2.0 * np.pi * HBAR_MEV_FS / (n_t * dt)  # meV

    # photon energy E = zpl + k dE with k = -m
    d_e = d_eps * 1e-3
    k_lo = max(int(np.ceil(-below_eV / d_e)), int(np.floor(-zpl / d_e)) + 1, -half + 1)
    k_hi = min(int(np.floor(above_eV / d_e)), half - 1)
    ks = np.arange(k_lo, k_hi + 1)
    a = a_eps[(-ks) % n_t] * 1e3  # 1/eV
    energies = zpl + ks * d_e

    peak = a.max()
    if a.min() < -1e-3 * peak:
        warnings.warn(
            f"spectral function has negative ripple {a.min() / peak:.2e} of its peak; clipped",
            stacklevel=2,
        )
    a = np.clip(a, 0.0, None)
    lum = energies**3 * a
    lum = lum / lum.max()
    return Spectrum(
        energies, lum, float(zpl), s0, float(np.exp(-s0)), sf.sigma_meV, float(gamma_meV), a
    )


def zpl_fraction(spec: Spectrum, half_width_meV: float) -> float:
    """Share of the spectral function A within +/- ``half_width_meV`` of the ZPL."""
    if spec.spectral_density is None:
        raise ValueError("spectrum carries no spectral function")
    a = spec.spectral_density
    inside = np.abs(spec.energies - spec.zpl) <= half_width_meV * 1e-3
    return float(a[inside].sum() / a.sum())


def zpl_weight(spec: Spectrum, half_width_meV: float) -> float:
    """ZPL share of A, correcting the window integral for the Lorentzian tails outside it.

    Approximates the Debye-Waller factor when sidebands start well outside the window.
    """
    capture = 2.0 / np.pi * np.arctan(half_width_meV / spec.gamma_meV)
    return zpl_fraction(spec, half_width_meV) / capture


def sideband_weights(spec: Spectrum, hbar_omega_meV: float, n_max: int = 4, n_fit: int | None = None) -> np.ndarray:
    """Weights of the n-phonon replicas of a single-mode spectrum.

    The spectral function is decomposed by linear least squares onto the exact
    replica shapes: a Lorentzian (HWHM gamma) convolved with a Gaussian of variance
    n sigma^2, centred ``n * hbar_omega_meV`` below the ZPL. Returns weights for
    n = 0 .. n_max.
    """
    if spec.spectral_density is None:
        raise ValueError("spectrum carries no spectral function")
    if n_fit is None:
        n_fit = n_max + 12
    eps = (spec.zpl - spec.energies) * 1e3  # meV below the ZPL
    basis = np.stack(
        [
            voigt_profile(eps - n * hbar_omega_meV, np.sqrt(n) * spec.smearing_meV, spec.gamma_meV)
            for n in range(n_fit + 1)
        ],
        axis=1,
    )
    target = spec.spectral_density * 1e-3  # 1/meV
    weights, *_ = np.linalg.lstsq(basis, target, rcond=None)
    return weights[: n_max + 1]
