"""Formation energies, charge transition levels and stability diagrams."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .constants import COULOMB_EV_A
from .model import DefectEnergetics

log = logging.getLogger(__name__)

CONDITIONS = ("rich", "poor")


def _check_condition(condition):
    if condition not in CONDITIONS:
        raise ValueError(f"condition must be 'rich' or 'poor', got {condition!r}")


def chemical_potential_term(d: DefectEnergetics, condition: str) -> float:
    """Sum of n_i mu_i over the species added (n > 0) or removed (n < 0)."""
    _check_condition(condition)
    col = 0 if condition == "rich" else 1
    total = 0.0
    for species, n in d.stoichiometry_delta:
        if species not in d.chem_potentials:
            raise KeyError(f"no chemical potential for {species!r}")
        total += n * d.chem_potentials[species][col]
    return total


def formation_energy(d: DefectEnergetics, q: int, fermi: float, condition: str = "rich") -> float:
    """E_f = E_q - E_host - sum n_i mu_i + q (vbm + fermi) + E_corr(q), in eV.

    ``fermi`` is measured from the VBM.
    """
    if not (0.0 <= fermi <= d.gap):
        warnings.warn(f"Fermi level {fermi:.3f} eV lies outside the gap [0, {d.gap}]", stacklevel=2)
    return intercept(d, q, condition) + q * fermi


def intercept(d: DefectEnergetics, q: int, condition: str = "rich") -> float:
    """Formation energy at the VBM (fermi = 0)."""
    e = d.entry(q)
    return e.etot - d.host_etot - chemical_potential_term(d, condition) + q * d.vbm + e.ecorr


def charge_transition_level(d: DefectEnergetics, q1: int, q2: int, condition: str = "rich") -> float:
    """Fermi level (from the VBM) where charge states q1 and q2 have equal formation energy."""
    if q1 == q2:
        raise ValueError("charge transition level needs two different charge states")
    a, b = intercept(d, q1, condition), intercept(d, q2, condition)
    return (a - b) / (q2 - q1)


@dataclass(frozen=True)
class FormationLine:
    q: int
    intercept: float
    slope: int

    def __post_init__(self):
        if self.slope != self.q:
            raise ValueError("slope of a formation line equals its charge")

    def __call__(self, fermi):
        return self.intercept + self.slope * np.asarray(fermi, dtype=float)


@dataclass(frozen=True)
class TransitionLevel:
    q_hi: int
    q_lo: int
    fermi_level: float
    on_envelope: bool
    inside_gap: bool


@dataclass(frozen=True)
class StabilityDiagram:
    """Lower envelope of the formation-energy lines over [0, gap].

    ``segments`` lists ``(q, start, end)`` Fermi intervals of the stable charge;
    ``ctls`` holds the envelope crossings, ``all_ctls`` every pair.
    """

    condition: str
    gap: float
    lines: tuple
    segments: tuple
    ctls: tuple
    all_ctls: tuple
    fermi_grid: np.ndarray
    stable_grid: np.ndarray

    def stable_charge(self, fermi: float) -> int:
        for q, lo, hi in self.segments:
            if fermi <= hi:
                return q
        return self.segments[-1][0]

    def line(self, q) -> FormationLine:
        for ln in self.lines:
            if ln.q == q:
                return ln
        raise KeyError(q)

    @property
    def stable_charges(self) -> list:
        return [q for q, _, _ in self.segments]


def lower_envelope(lines, lo: float, hi: float):
    """Exact lower envelope of straight lines on [lo, hi] as (q, start, end) segments."""
    # at the left edge the lowest line wins; ties go to the steeper descent
    current = min(lines, key=lambda ln: (ln(lo), ln.slope))
    x = lo
    segments = []
    while True:
        best = None
        for ln in lines:
            if ln.slope >= current.slope:
                continue
            xc = (ln.intercept - current.intercept) / (current.slope - ln.slope)
            if xc <= x:
                continue
            if best is None or xc < best[0] or (xc == best[0] and ln.slope < best[1].slope):
                best = (xc, ln)
        if best is None or best[0] >= hi:
            segments.append((current.q, x, hi))
            return segments
        segments.append((current.q, x, best[0]))
        x, current = best


def stability_diagram(d: DefectEnergetics, condition: str = "rich", n_points: int = 1001) -> StabilityDiagram:
    if len(d.charge_entries) < 2:
        raise ValueError("a stability diagram needs at least two charge states")
    _check_condition(condition)
    lines = tuple(FormationLine(q, intercept(d, q, condition), q) for q in d.charges)
    segments = lower_envelope(lines, 0.0, d.gap)
    ctls = tuple(
        TransitionLevel(a[0], b[0], a[2], True, 0.0 < a[2] < d.gap)
        for a, b in zip(segments[:-1], segments[1:])
    )
    envelope_pairs = {(c.q_hi, c.q_lo) for c in ctls}
    all_ctls = []
    for qa, qb in combinations(sorted(d.charges, reverse=True), 2):
        x = charge_transition_level(d, qa, qb, condition)
        all_ctls.append(TransitionLevel(qa, qb, x, (qa, qb) in envelope_pairs, 0.0 < x < d.gap))
    grid = np.linspace(0.0, d.gap, n_points)
    stable = np.empty(n_points, dtype=int)
    for q, lo, hi in reversed(segments):
        stable[grid <= hi] = q
    return StabilityDiagram(condition, d.gap, lines, tuple(segments), ctls, tuple(all_ctls), grid, stable)


def point_charge_correction(q: int, madelung: float, eps: float, length_A: float, approximate: bool = False) -> float:
    """Isotropic point-charge image energy q^2 alpha / (2 eps L), in eV.

    This is a crude estimate for sensitivity studies only, not a replacement for
    a proper finite-size correction of charged 2D defects; ``approximate=True``
    must be passed to acknowledge that.
    """
    if not approximate:
        raise ValueError("point-charge correction is approximate; pass approximate=True")
    if eps <= 0 or length_A <= 0:
        raise ValueError("dielectric constant and cell length must be positive")
    if q != 0:
        log.warning("using approximate point-charge correction for q=%d", q)
    return q * q * madelung * COULOMB_EV_A / (2.0 * eps * length_A)
