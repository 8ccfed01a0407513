"""Domain types shared by every module.

All containers are frozen dataclasses holding read-only numpy arrays, and
each one validates its invariants on construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

log = logging.getLogger(__name__)

NORM_TOL = 1e-6
ORTHO_TOL = 1e-5


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CrystalStructure:
    """Periodic supercell snapshot. Rows of ``lattice`` are lattice vectors (A)."""

    lattice: np.ndarray
    species: tuple
    masses: np.ndarray
    positions: np.ndarray
    label: str = ""
    energy: Optional[float] = None  # total energy in eV, when known

    def __post_init__(self):
        lattice = _frozen(self.lattice)
        positions = _frozen(self.positions)
        masses = _frozen(self.masses)
        species = tuple(str(s) for s in self.species)
        if lattice.shape != (3, 3):
            raise ValueError(f"lattice must be 3x3, got shape {lattice.shape}")
        if abs(np.linalg.det(lattice)) < 1e-12:
            raise ValueError("lattice is singular (zero cell volume)")
        n = len(species)
        if n < 1:
            raise ValueError("structure needs at least one atom")
        if positions.shape != (n, 3):
            raise ValueError(f"positions must be ({n}, 3), got {positions.shape}")
        if masses.shape != (n,):
            raise ValueError(f"masses must have length {n}, got {masses.shape}")
        if np.any(~np.isfinite(masses)) or np.any(masses <= 0):
            raise ValueError("all masses must be positive")
        if np.any(~np.isfinite(positions)):
            raise ValueError("positions must be finite")
        object.__setattr__(self, "lattice", lattice)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "species", species)

    @property
    def natoms(self) -> int:
        return len(self.species)

    def fractional(self, wrap: bool = False) -> np.ndarray:
        """Fractional coordinates; mapped into [0, 1) only when ``wrap`` is set."""
        frac = np.linalg.solve(self.lattice.T, self.positions.T).T
        if wrap:
            frac = frac - np.floor(frac)
            frac[frac >= 1.0] = 0.0
        return frac

    def wrapped(self) -> "CrystalStructure":
        frac = self.fractional(wrap=True)
        return CrystalStructure(
            self.lattice, self.species, self.masses, frac @ self.lattice, self.label, self.energy
        )


@dataclass(frozen=True)
class PhononModeSet:
    """Gamma-point phonons: ``frequencies`` in meV (negative = imaginary),
    ``eigenvectors`` with shape (3N, N, 3), each mode normalised over 3N components.
    """

    natoms: int
    frequencies: np.ndarray
    eigenvectors: np.ndarray
    mass_weighted: bool = True

    def __post_init__(self):
        freqs = _frozen(self.frequencies)
        vecs = _frozen(self.eigenvectors)
        n = int(self.natoms)
        if n < 1:
            raise ValueError("natoms must be >= 1")
        if freqs.shape != (3 * n,):
            raise ValueError(f"expected {3 * n} modes, got {freqs.shape[0] if freqs.ndim else 0}")
        if vecs.shape != (3 * n, n, 3):
            raise ValueError(f"eigenvectors must have shape {(3 * n, n, 3)}, got {vecs.shape}")
        flat = vecs.reshape(3 * n, 3 * n)
        norms = np.linalg.norm(flat, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOL)
        if bad.size:
            raise ValueError(f"mode {bad[0]} has norm {norms[bad[0]]:.8f}, not 1")
        gram = flat @ flat.T
        off = np.abs(gram - np.eye(3 * n)).max()
        if off > ORTHO_TOL:
            log.warning("phonon eigenvectors deviate from orthogonality by %.2e", off)
        object.__setattr__(self, "natoms", n)
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "eigenvectors", vecs)
        object.__setattr__(self, "mass_weighted", bool(self.mass_weighted))

    @property
    def nmodes(self) -> int:
        return 3 * self.natoms


@dataclass(frozen=True)
class ChargeEntry:
    q: int
    etot: float
    ecorr: float = 0.0


@dataclass(frozen=True)
class DefectEnergetics:
    """Inputs to the formation-energy expression for one defect.

    ``chem_potentials`` maps species to ``(mu_rich, mu_poor)`` in eV.
    """

    host_etot: float
    charge_entries: tuple
    stoichiometry_delta: tuple
    chem_potentials: Mapping[str, tuple]
    vbm: float
    gap: float
    labels: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        entries = tuple(
            e if isinstance(e, ChargeEntry) else ChargeEntry(int(e[0]), float(e[1]), float(e[2]))
            for e in self.charge_entries
        )
        charges = [e.q for e in entries]
        if len(set(charges)) != len(charges):
            dup = sorted({q for q in charges if charges.count(q) > 1})
            raise ValueError(f"duplicate charge state(s): {dup}")
        if not self.gap > 0:
            raise ValueError(f"gap must be positive, got {self.gap}")
        for e in entries:
            if not np.isfinite(e.ecorr) or not np.isfinite(e.etot):
                raise ValueError(f"non-finite energy for q={e.q}")
            if e.q == 0 and e.ecorr != 0.0:
                raise ValueError("correction for the neutral state must be 0")
        stoich = tuple((str(s), int(n)) for s, n in self.stoichiometry_delta)
        chem = {str(k): (float(v[0]), float(v[1])) for k, v in self.chem_potentials.items()}
        missing = [s for s, _ in stoich if s not in chem]
        if missing:
            raise ValueError(f"no rich/poor chemical potential for species {missing}")
        object.__setattr__(self, "charge_entries", tuple(sorted(entries, key=lambda e: -e.q)))
        object.__setattr__(self, "stoichiometry_delta", stoich)
        object.__setattr__(self, "chem_potentials", chem)
        object.__setattr__(self, "labels", dict(self.labels))

    @property
    def charges(self) -> list:
        return [e.q for e in self.charge_entries]

    def entry(self, q: int) -> ChargeEntry:
        for e in self.charge_entries:
            if e.q == q:
                return e
        raise KeyError(f"charge state {q} not present (have {self.charges})")


@dataclass(frozen=True)
class PlanewaveOrbital:
    """Kohn-Sham orbital in a plane-wave basis.

    ``kpoint`` and ``gvectors`` are Cartesian wavevectors in 1/A (2 pi included).
    """

    kpoint: np.ndarray
    gvectors: np.ndarray
    coefficients: np.ndarray
    energy: float
    band_index: int = 0
    spin_channel: int = 0

    def __post_init__(self):
        k = _frozen(self.kpoint)
        g = _frozen(self.gvectors)
        c = _frozen(self.coefficients, dtype=complex)
        if k.shape != (3,):
            raise ValueError("kpoint must be a 3-vector")
        if g.ndim != 2 or g.shape[1] != 3 or g.shape[0] != c.shape[0]:
            raise ValueError(f"gvectors {g.shape} and coefficients {c.shape} disagree")
        if len(np.unique(np.round(g, 8), axis=0)) != len(g):
            raise ValueError("duplicate G-vectors")
        norm = float(np.sum(np.abs(c) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"orbital norm {norm:.8f} is not 1")
        object.__setattr__(self, "kpoint", k)
        object.__setattr__(self, "gvectors", g)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "energy", float(self.energy))
        object.__setattr__(self, "band_index", int(self.band_index))
        object.__setattr__(self, "spin_channel", int(self.spin_channel))


@dataclass(frozen=True)
class TransitionDipole:
    """Complex dipole vector (e A). Orientation uses component moduli.

    ``theta_deg``/``phi_deg`` are ``None`` when the dipole vanishes.
    """

    mu: np.ndarray
    kind: str = "emission"
    r: float = field(init=False)
    theta_deg: Optional[float] = field(init=False)
    phi_deg: Optional[float] = field(init=False)

    def __post_init__(self):
        if self.kind not in ("excitation", "emission"):
            raise ValueError(f"kind must be excitation or emission, got {self.kind!r}")
        mu = _frozen(self.mu, dtype=complex)
        if mu.shape != (3,):
            raise ValueError("mu must be a complex 3-vector")
        mod = np.abs(mu)
        r = float(np.sqrt(np.sum(mod**2)))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "r", r)
        if r == 0.0:
            object.__setattr__(self, "theta_deg", None)
            object.__setattr__(self, "phi_deg", None)
            return
        theta = float(np.degrees(np.arctan2(np.hypot(mod[0], mod[1]), mod[2])))
        phi = float(np.degrees(np.arctan2(mod[1], mod[0])))
        object.__setattr__(self, "theta_deg", theta)
        object.__setattr__(self, "phi_deg", phi)

    @property
    def orientation(self) -> np.ndarray:
        """Unit vector built from component moduli."""
        if self.r == 0.0:
            raise ValueError("zero dipole has no orientation")
        return np.abs(self.mu) / self.r


@dataclass(frozen=True)
class Spectrum:
    """Emission spectrum on a uniform photon-energy grid (eV).

    ``intensities`` is the normalised PL lineshape (max 1). ``spectral_density``,
    if present, is the optical spectral function A in 1/eV on the same grid.
    """

    energies: np.ndarray
    intensities: np.ndarray
    zpl: float
    hr_total: float
    dw: float
    smearing_meV: float
    gamma_meV: float
    spectral_density: Optional[np.ndarray] = None

    def __post_init__(self):
        e = _frozen(self.energies)
        i = _frozen(self.intensities)
        if e.ndim != 1 or e.shape != i.shape:
            raise ValueError("energies and intensities must be 1-D arrays of equal length")
        if e.size >= 2:
            step = np.diff(e)
            if np.any(step <= 0):
                raise ValueError("energy grid must be strictly increasing")
            # 1e-12 relative, plus the rounding floor of the stored grid values
            tol = 1e-12 * step[0] + 4 * np.finfo(float).eps * np.max(np.abs(e))
            if np.max(np.abs(step - step[0])) > tol:
                raise ValueError("energy grid must be uniform")
        if np.any(i < 0):
            raise ValueError("emission intensities must be nonnegative")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "intensities", i)
        if self.spectral_density is not None:
            a = _frozen(self.spectral_density)
            if a.shape != e.shape:
                raise ValueError("spectral_density must match the energy grid")
            object.__setattr__(self, "spectral_density", a)

    @property
    def step(self) -> float:
        return float(self.energies[1] - self.energies[0])

    @property
    def wavelengths(self) -> np.ndarray:
        from .constants import UNITS

        return UNITS.eV_nm / self.energies

