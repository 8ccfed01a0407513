"""Synthetic fixture builders: toy cells, mode sets, orbitals and energetics.

``write_reference_suite`` lays out a 16-defect manifest (four hosts, two
substitution sites, neutral and singly negative) whose inputs are built so the
pipeline reproduces prescribed Q, ZPL, HR, lifetime and dipole angles.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import optics, parsers
from .constants import HBAR2_OVER_ME, HR_CONSTANT
from .model import ChargeEntry, CrystalStructure, DefectEnergetics, PhononModeSet, PlanewaveOrbital


@dataclass(frozen=True)
class ReferenceRow:
    host: str
    site: str
    charge: int
    Q: float
    zpl_eV: float
    zpl_nm: float
    hr: float
    dw: float
    lifetime_ns: float
    theta_ex: float
    phi_ex: float
    theta_em: float
    phi_em: float
    misalignment: float

    @property
    def label(self) -> str:
        x = "S" if self.host.endswith("S2") else "Se"
        tag = f"C{x}" if self.charge == 0 else f"C{x}({self.charge:+d})"
        return f"{self.host}-{tag}-{self.site}"


def _r(host, site, charge, *vals):
    return ReferenceRow(host, site, charge, *vals)


# reference values per defect, rounded to two decimals
REFERENCE_ROWS = (
    _r("WS2", "top", 0, 1.24, 0.78, 1581, 3.34, 0.04, 87.86, 0.01, 26.83, 0.00, 14.09, 0.01),
    _r("WS2", "middle", 0, 1.10, 0.82, 1506, 2.77, 0.06, 451.73, 0.00, 51.37, 0.01, 26.19, 0.00),
    _r("WSe2", "top", 0, 1.50, 0.91, 1367, 4.17, 0.02, 146.84, 1.56, 20.54, 0.01, 25.24, 1.56),
    _r("WSe2", "middle", 0, 1.41, 0.94, 1319, 3.83, 0.02, 303.64, 0.00, 66.61, 0.05, 13.29, 0.05),
    _r("MoS2", "top", 0, 1.38, 0.85, 1464, 4.07, 0.02, 96.27, 0.16, 80.79, 0.05, 39.32, 0.12),
    _r("MoS2", "middle", 0, 1.14, 0.84, 1475, 3.39, 0.03, 452.31, 0.01, 74.38, 0.04, 29.77, 0.03),
    _r("MoSe2", "top", 0, 1.94, 0.92, 1342, 5.94, 0.00, 153.65, 1.22, 2.81, 0.00, 63.39, 1.22),
    _r("MoSe2", "middle", 0, 1.57, 0.95, 1304, 4.52, 0.01, 336.46, 0.00, 35.05, 0.00, 38.83, 0.00),
    _r("WS2", "top", -1, 1.42, 1.55, 798, 5.05, 0.01, 293.40, 0.02, 79.21, 0.01, 26.70, 0.02),
    _r("WS2", "middle", -1, 1.51, 1.58, 786, 5.50, 0.00, 387.09, 0.00, 60.72, 0.02, 25.21, 0.02),
    _r("WSe2", "top", -1, 1.58, 1.35, 919, 5.13, 0.01, 346.63, 0.40, 30.87, 0.01, 73.02, 0.39),
    _r("WSe2", "middle", -1, 1.96, 1.30, 951, 6.81, 0.00, 213.32, 0.47, 60.16, 0.20, 63.59, 0.27),
    _r("MoS2", "top", -1, 0.99, 1.53, 813, 3.28, 0.04, 432.62, 0.04, 24.57, 0.06, 13.15, 0.02),
    _r("MoS2", "middle", -1, 1.07, 1.55, 800, 3.76, 0.02, 325.70, 0.00, 39.15, 0.01, 58.49, 0.01),
    _r("MoSe2", "top", -1, 1.21, 1.33, 933, 3.59, 0.03, 493.62, 0.14, 3.08, 0.01, 11.25, 0.13),
    _r("MoSe2", "middle", -1, 1.06, 1.30, 954, 2.93, 0.05, 212.78, 0.25, 46.79, 0.65, 42.44, 0.41),
)

REFRACTIVE_INDEX = {"WS2": 4.3751, "WSe2": 5.1319, "MoS2": 4.3595, "MoSe2": 4.97}
BAND_GAP = {"WS2": 1.81, "WSe2": 1.74, "MoS2": 1.68, "MoSe2": 1.44}
CTL_0_MINUS1 = {"WS2": 0.75, "WSe2": 0.90, "MoS2": 0.79, "MoSe2": 0.97}

# phonon energies (meV) that carry the relaxation; the rest stay orthogonal to it
LOW_MODES = (10.0, 14.0)
HIGH_MODES = (36.0, 44.0)
TOY_LATTICE = np.diag([9.5, 9.5, 25.0])
# angles printed as 0.00 are nudged so the azimuth stays defined
MIN_THETA_DEG = 1e-3


def _host_species(host):
    metal = "W" if host.startswith("W") else "Mo"
    chalc = "Se" if host.endswith("Se2") else "S"
    return metal, chalc


def toy_cell(host="WS2", site="top", rng=None) -> CrystalStructure:
    """Six-atom cell: two metals, three chalcogens and a carbon on a chalcogen site."""
    rng = np.random.default_rng(0) if rng is None else rng
    metal, chalc = _host_species(host)
    species = [metal, metal, chalc, chalc, chalc, "C"]
    cz = 0.62 if site == "top" else 0.50
    frac = np.array(
        [
            [0.00, 0.00, 0.44],
            [0.50, 0.50, 0.56],
            [0.33, 0.67, 0.38],
            [0.67, 0.33, 0.50],
            [0.33, 0.67, 0.62],
            [0.67, 0.33, cz],
        ]
    )
    frac[:, :2] += rng.uniform(-0.02, 0.02, size=(6, 2))
    masses = [parsers.element_mass(s) for s in species]
    return CrystalStructure(TOY_LATTICE, species, masses, frac @ TOY_LATTICE, label=f"{host}-{site}")


def translation_vectors(masses) -> np.ndarray:
    """Three orthonormal mass-weighted rigid translations, shape (3, 3N)."""
    m = np.sqrt(np.asarray(masses, dtype=float))
    t = np.zeros((3, m.size, 3))
    for i in range(3):
        t[i, :, i] = m
    t = t.reshape(3, -1)
    return t / np.linalg.norm(t, axis=1, keepdims=True)


def orthonormal_modes(masses, frequencies, rng=None) -> PhononModeSet:
    """Complete mass-weighted mode set: exact translations at 0 meV plus a random
    orthonormal complement carrying ``frequencies`` (3N - 3 values)."""
    rng = np.random.default_rng(0) if rng is None else rng
    n = len(masses)
    freqs = np.asarray(frequencies, dtype=float)
    if freqs.shape != (3 * n - 3,):
        raise ValueError(f"need {3 * n - 3} nonzero-mode frequencies")
    trans = translation_vectors(masses)
    seed = np.concatenate([trans.T, rng.normal(size=(3 * n, 3 * n - 3))], axis=1)
    qmat, _ = np.linalg.qr(seed)
    vecs = qmat.T.copy()
    vecs[:3] = trans  # QR may flip signs
    return PhononModeSet(n, np.concatenate([[0.0, 0.0, 0.0], freqs]), vecs.reshape(3 * n, n, 3), True)


def toy_frequencies(n_atoms=6) -> np.ndarray:
    active = list(LOW_MODES) + list(HIGH_MODES)
    rest = np.linspace(6.5, 58.5, 3 * n_atoms - 3 - len(active))
    return np.array(active + list(rest))


def split_relaxation(Q: float, S: float):
    """Squared mode amplitudes (low, high) so the four active modes give both Q and S.

    Each low mode gets x, each high mode y, with 2x + 2y = Q^2 and
    HR_CONSTANT (sum_low w x + sum_high w y) = S.
    """
    ws_low, ws_high = sum(LOW_MODES), sum(HIGH_MODES)
    target = S / HR_CONSTANT
    x = (ws_high * Q * Q / 2.0 - target) / (ws_high - ws_low)
    y = Q * Q / 2.0 - x
    if x < 0 or y < 0:
        lo, hi = ws_low / 2.0, ws_high / 2.0
        raise ValueError(
            f"Q={Q}, S={S} needs an effective phonon of {target / (Q * Q):.1f} meV outside [{lo}, {hi}]"
        )
    return x, y


def relaxed_pair(ground: CrystalStructure, modes: PhononModeSet, Q: float, S: float, zpl: float, e_ground=-100.0):
    """Ground/excited structures with total energies whose displacement yields (Q, S)."""
    x, y = split_relaxation(Q, S)
    # active modes follow the three translations, in toy_frequencies order
    n_low, n_high = len(LOW_MODES), len(HIGH_MODES)
    if not np.allclose(modes.frequencies[3 : 3 + n_low + n_high], LOW_MODES + HIGH_MODES):
        raise ValueError("mode set was not built by orthonormal_modes(toy_frequencies())")
    amps = np.zeros(modes.nmodes)
    amps[3 : 3 + n_low] = np.sqrt(x)
    amps[3 + n_low : 3 + n_low + n_high] = np.sqrt(y)
    flat = modes.eigenvectors.reshape(modes.nmodes, -1)
    dq = (amps @ flat).reshape(modes.natoms, 3)
    dR = dq / np.sqrt(ground.masses)[:, None]
    g = CrystalStructure(ground.lattice, ground.species, ground.masses, ground.positions, ground.label, e_ground)
    e = CrystalStructure(
        ground.lattice, ground.species, ground.masses, ground.positions + dR, ground.label, e_ground + zpl
    )
    return g, e


def dipole_vector(r: float, theta_deg: float, phi_deg: float, rng=None) -> np.ndarray:
    """Complex dipole whose component moduli follow (r, theta, phi); phases are random."""
    rng = np.random.default_rng(0) if rng is None else rng
    mod = optics.spherical_to_cartesian(r, max(theta_deg, MIN_THETA_DEG), phi_deg)
    return np.abs(mod) * np.exp(1j * rng.uniform(0, 2 * np.pi, 3))


def orbital_pair(mu, e_initial: float, e_final: float, lattice=TOY_LATTICE, rng=None):
    """Gamma-point orbitals (initial, final) whose transition dipole equals ``mu``.

    The initial state is an equal mix of G = 0 and one G along each axis; the
    final state's coefficients on those G are solved for exactly.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    mu = np.asarray(mu, dtype=complex)
    de = e_final - e_initial
    v = -1j * mu * de / HBAR2_OVER_ME  # required sum_G c_f* (k+G) c_i
    recip = 2 * np.pi * np.linalg.inv(lattice).T
    gs, d = [np.zeros(3)], []
    for j in range(3):
        g1 = np.linalg.norm(recip[j])
        harm = max(1, int(np.ceil(2 * abs(v[j]) / (0.5 * g1))))
        gvec = harm * recip[j]
        gs.append(gvec)
        d.append(np.conj(2 * v[j] / gvec[j]))
    d = np.array(d)
    rest = 1.0 - np.sum(np.abs(d) ** 2)
    if rest < 0:
        raise ValueError("dipole too large for the toy orbital basis")
    ci = np.full(4, 0.5, dtype=complex)
    cf = np.concatenate([[np.sqrt(rest)], d]) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    gs = np.array(gs)
    k = np.zeros(3)
    return PlanewaveOrbital(k, gs, ci, e_initial, 10), PlanewaveOrbital(k, gs, cf, e_final, 11)


def toy_energetics(host: str, ctl: float | None = None, gauge: float = 0.0) -> DefectEnergetics:
    """Charge states +1, 0, -1, -2 with (0|-1) at ``ctl`` and (-1|-2) at gap - 0.15 eV."""
    gap = BAND_GAP[host]
    ctl = CTL_0_MINUS1[host] if ctl is None else ctl
    metal, chalc = _host_species(host)
    vbm, host_e = -1.2, -500.0 + gauge
    stoich = (("C", 1), (chalc, -1))
    chem = {"C": (-9.2, -10.0), chalc: (-4.1, -5.2)}
    mu_term = sum(n * chem[s][0] for s, n in stoich)
    i0 = 2.0
    targets = {1: i0 + 0.3, 0: i0, -1: i0 + ctl, -2: i0 + ctl + (gap - 0.15)}
    entries = []
    for q, icpt in targets.items():
        ecorr = 0.1 * q * q
        etot = icpt + host_e + mu_term - q * vbm - ecorr
        entries.append(ChargeEntry(q, etot, ecorr))
    return DefectEnergetics(host_e, tuple(entries), stoich, chem, vbm, gap, {"host": host})


def write_reference_suite(outdir, seed: int = 7, orbital_format: str = "json") -> Path:
    """Write fixtures for every reference row plus a manifest; returns the manifest path."""
    outdir = Path(outdir)
    rng = np.random.default_rng(seed)
    defects = []
    for host in REFRACTIVE_INDEX:
        en_path = outdir / host / "energetics.json"
        en_path.parent.mkdir(parents=True, exist_ok=True)
        parsers.dump_energetics(toy_energetics(host), en_path)
    for row in REFERENCE_ROWS:
        stem = outdir / row.host / _dirname(row.label)
        stem.mkdir(parents=True, exist_ok=True)
        cell = toy_cell(row.host, row.site, rng)
        modes = orthonormal_modes(cell.masses, toy_frequencies(cell.natoms), rng)
        g, e = relaxed_pair(cell, modes, row.Q, row.hr, row.zpl_eV)
        parsers.dump_structure(g, stem / "ground.json")
        parsers.dump_structure(e, stem / "excited.json")
        parsers.dump_phonons(modes, stem / "phonons.json")
        n_d = REFRACTIVE_INDEX[row.host]
        r = float(np.sqrt(optics.dipole_from_lifetime(row.zpl_eV, row.lifetime_ns, n_d)))
        e_occ = -0.3
        pairs = {
            # ground-state orbitals: occupied -> empty
            "excitation": orbital_pair(dipole_vector(r, row.theta_ex, row.phi_ex, rng), e_occ, e_occ + row.zpl_eV,
                                       cell.lattice, rng),
            # excited-state orbitals: promoted electron falls back
            "emission": orbital_pair(dipole_vector(r, row.theta_em, row.phi_em, rng), e_occ + row.zpl_eV, e_occ,
                                     cell.lattice, rng),
        }
        orbitals = {}
        dump = parsers.dump_orbital if orbital_format == "json" else parsers.dump_orbital_text
        ext = "json" if orbital_format == "json" else "txt"
        for kind, (ini, fin) in pairs.items():
            ip, fp = stem / f"{kind}_initial.{ext}", stem / f"{kind}_final.{ext}"
            dump(ini, ip)
            dump(fin, fp)
            orbitals[kind] = {"initial": ip, "final": fp}
        defects.append(
            parsers.DefectInputs(
                label=row.label,
                ground_structure=stem / "ground.json",
                excited_structure=stem / "excited.json",
                phonons=stem / "phonons.json",
                refractive_index=n_d,
                energetics=outdir / row.host / "energetics.json",
                orbitals=orbitals,
            )
        )
    manifest_path = outdir / "manifest.json"
    parsers.dump_manifest(parsers.Manifest(manifest_path, defects, dict(parsers.DEFAULT_OPTIONS)), manifest_path)
    return manifest_path


def _dirname(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in label)
