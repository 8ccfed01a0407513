"""Batch runs over a manifest: one report row and a set of artifacts per defect."""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Optional

import numpy as np

from . import energetics as en
from . import lineshape as ls
from . import optics
from . import parsers
from . import writers
from .constants import UNITS

log = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "label", "Q", "zpl_eV", "zpl_nm", "HR", "DW", "lifetime_ns",
    "theta_ex", "phi_ex", "theta_em", "phi_em", "misalignment",
]


@dataclass(frozen=True)
class DefectReportRow:
    label: str
    Q: float
    zpl_eV: float
    zpl_nm: float
    hr: float
    dw: float
    lifetime_ns: Optional[float] = None
    theta_ex: Optional[float] = None
    phi_ex: Optional[float] = None
    theta_em: Optional[float] = None
    phi_em: Optional[float] = None
    misalignment: Optional[float] = None

    def __post_init__(self):
        if abs(self.zpl_nm - UNITS.eV_nm / self.zpl_eV) > 1e-9 * self.zpl_nm:
            raise ValueError("zpl_nm inconsistent with zpl_eV")
        if abs(self.dw - np.exp(-self.hr)) > 1e-9 * max(self.dw, 1e-300):
            raise ValueError("DW inconsistent with exp(-HR)")

    def values(self) -> list:
        return [
            self.label, self.Q, self.zpl_eV, self.zpl_nm, self.hr, self.dw, self.lifetime_ns,
            self.theta_ex, self.phi_ex, self.theta_em, self.phi_em, self.misalignment,
        ]


@dataclass
class DefectResult:
    label: str
    row: Optional[DefectReportRow] = None
    artifacts: dict = None  # relative filename -> text
    error: Optional[str] = None


def _safe(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._+-]+", "_", label).strip("_") or "defect"


def load_inputs(d: parsers.DefectInputs) -> dict:
    """Parse every input of one defect before any computation."""
    out = {
        "ground": parsers.parse_structure(d.ground_structure),
        "excited": parsers.parse_structure(d.excited_structure),
        "phonons": parsers.parse_phonons(d.phonons),
        "energetics": parsers.parse_energetics(d.energetics) if d.energetics else None,
        "orbitals": {},
    }
    for kind, pair in d.orbitals.items():
        out["orbitals"][kind] = (parsers.parse_orbital(pair["initial"]), parsers.parse_orbital(pair["final"]))
    return out


def resolve_zpl(d: parsers.DefectInputs, ground, excited) -> float:
    if d.zpl_override is not None:
        return d.zpl_override
    if ground.energy is None or excited.energy is None:
        raise ValueError("no zpl_eV given and structures carry no total energies")
    zpl = excited.energy - ground.energy
    if zpl <= 0:
        raise ValueError(f"excited-state energy does not exceed the ground state (ZPL {zpl:.4f} eV)")
    return zpl


def compute_defect(d: parsers.DefectInputs, inputs: dict, options: dict) -> DefectResult:
    """Run the lineshape, optics and energetics pipelines for one defect."""
    opts = dict(options)
    opts.update(d.options)
    ground, excited, modes = inputs["ground"], inputs["excited"], inputs["phonons"]
    dR = ls.displacement(ground, excited)
    dQ = ls.mass_weighted_deltaQ(dR, ground.masses)
    projections = ls.project_modes(dR, ground.masses, modes, exclude=ls.translational_modes(modes, ground.masses))
    summary = ls.hr_summary(projections, dQ)
    zpl = resolve_zpl(d, ground, excited)
    grid = ls.phonon_grid(projections, opts["grid_step_meV"], opts["sigma_meV"])
    sf = ls.spectral_function(projections, grid, opts["sigma_meV"])
    spec = ls.generating_lineshape(sf, zpl, opts["gamma_meV"], opts["t_max_fs"], int(opts["n_t"]))

    meta = {k: json.dumps(opts[k]) for k in sorted(opts) if k != "workers"}
    meta["label"] = d.label
    stem = _safe(d.label)
    arts = {}
    arts[f"{stem}/modes.csv"] = writers.write_modes_csv(projections, meta=meta)
    arts[f"{stem}/spectrum.csv"] = writers.write_spectrum_csv(spec, meta=meta)
    arts[f"{stem}/spectrum.svg"] = writers.write_svg_plot(spec, tuple(opts["bands"]), None, f"PL spectrum {d.label}")

    dipoles = {}
    for kind, (ini, fin) in inputs["orbitals"].items():
        dipoles[kind] = optics.transition_dipole(fin, ini, kind)
    lifetime = None
    em = dipoles.get("emission")
    if em is not None:
        lifetime = optics.radiative_lifetime(zpl, em.r**2, d.refractive_index).lifetime_ns
    ex = dipoles.get("excitation")
    mis = optics.misalignment(ex, em) if (ex and em and ex.r > 0 and em.r > 0) else None
    row = DefectReportRow(
        d.label, dQ, zpl, UNITS.eV_nm / zpl, summary.S_total, summary.dw, lifetime,
        ex.theta_deg if ex else None, ex.phi_deg if ex else None,
        em.theta_deg if em else None, em.phi_deg if em else None, mis,
    )

    extra = {}
    if inputs["energetics"] is not None:
        diagrams = {c: en.stability_diagram(inputs["energetics"], c, int(opts["n_points"])) for c in en.CONDITIONS}
        main = diagrams[opts["condition"]]
        arts[f"{stem}/formation.csv"] = writers.write_diagram_csv(main, meta=meta)
        arts[f"{stem}/formation.svg"] = writers.write_diagram_svg(
            [main] + [v for k, v in diagrams.items() if k != opts["condition"]], None, f"formation energy {d.label}"
        )
        extra["ctls"] = {
            c: [{"q_hi": t.q_hi, "q_lo": t.q_lo, "fermi_eV": t.fermi_level} for t in dg.ctls]
            for c, dg in diagrams.items()
        }
        extra["stable_charges"] = {c: dg.stable_charges for c, dg in diagrams.items()}
    summary_doc = {
        "row": asdict(row),
        "dipoles": {
            k: {"mu_re": v.mu.real.tolist(), "mu_im": v.mu.imag.tolist(), "r": v.r,
                "theta_deg": v.theta_deg, "phi_deg": v.phi_deg}
            for k, v in sorted(dipoles.items())
        },
        "options": {k: opts[k] for k in sorted(opts) if k != "workers"},
        **extra,
    }
    arts[f"{stem}/summary.json"] = json.dumps(summary_doc, indent=1, sort_keys=True) + "\n"
    return DefectResult(d.label, row, arts)


def _describe(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def run_manifest(manifest_path, out_dir=None, overrides: Optional[dict] = None) -> int:
    """Process every defect of a manifest; returns 0 if all succeeded, 1 otherwise.

    Raises ``parsers.ManifestError`` for an unreadable manifest or missing files.
    """
    manifest = parsers.parse_manifest(manifest_path)
    options = dict(manifest.options)
    options.update({k: v for k, v in (overrides or {}).items() if v is not None})
    out = Path(out_dir or manifest.output_dir or Path(manifest_path).parent / "out")
    out.mkdir(parents=True, exist_ok=True)

    # parse everything before computing anything
    loaded, results = {}, []
    for d in manifest.defects:
        try:
            loaded[d.label] = load_inputs(d)
        except (ValueError, OSError, KeyError) as exc:
            results.append(DefectResult(d.label, error=_describe(exc)))

    def work(d):
        try:
            return compute_defect(d, loaded[d.label], options)
        except (ValueError, ArithmeticError, KeyError) as exc:
            return DefectResult(d.label, error=_describe(exc))

    todo = [d for d in manifest.defects if d.label in loaded]
    with ThreadPoolExecutor(max_workers=max(1, int(options.get("workers", 1)))) as pool:
        results += list(pool.map(work, todo))
    results.sort(key=lambda r: r.label)

    # single writer keeps outputs deterministic
    rows = []
    for r in results:
        if r.error:
            log.error("%s: %s", r.label, r.error)
            continue
        for name, text in r.artifacts.items():
            p = out / name
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(text)
        rows.append(r.row.values())
    (out / "report.csv").write_text(writers.rows_text(REPORT_COLUMNS, rows))
    failures = {r.label: r.error for r in results if r.error}
    diag = "".join(f"{label}: {msg}\n" for label, msg in failures.items())
    (out / "diagnostics.txt").write_text(diag)
    meta = {
        "manifest": str(Path(manifest_path).name),
        "options": {k: options[k] for k in sorted(options) if k != "workers"},
        "defects": [r.label for r in results],
        "failed": failures,
    }
    (out / "report_meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return 1 if failures else 0
