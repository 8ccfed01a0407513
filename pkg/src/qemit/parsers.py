"""Readers and native-schema writers for structures, phonons, energetics, orbitals
and run manifests.

Native files are JSON objects carrying ``schema_version`` and ``kind`` keys.
Structures may also be given in the POSCAR text layout, orbitals in a simple
keyword text layout (see README).
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .constants import thz_to_mev
from .model import (
    ChargeEntry,
    CrystalStructure,
    DefectEnergetics,
    PhononModeSet,
    PlanewaveOrbital,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RENORM_TOL = 1e-3

# standard atomic weights, amu
ELEMENT_MASSES = {
    "H": 1.008, "He": 4.0026, "Li": 6.94, "Be": 9.0122, "B": 10.81, "C": 12.011,
    "N": 14.007, "O": 15.999, "F": 18.998, "Na": 22.990, "Mg": 24.305, "Al": 26.982,
    "Si": 28.085, "P": 30.974, "S": 32.06, "Cl": 35.45, "K": 39.098, "Ca": 40.078,
    "Ti": 47.867, "V": 50.942, "Cr": 51.996, "Mn": 54.938, "Fe": 55.845, "Co": 58.933,
    "Ni": 58.693, "Cu": 63.546, "Zn": 65.38, "Ga": 69.723, "Ge": 72.630, "As": 74.922,
    "Se": 78.971, "Nb": 92.906, "Mo": 95.95, "In": 114.82, "Sn": 118.71, "Sb": 121.76,
    "Te": 127.60, "Hf": 178.49, "Ta": 180.95, "W": 183.84, "Re": 186.21, "Pt": 195.08,
}


class ParseError(ValueError):
    """Malformed input file; carries the path and line (or record) location."""

    def __init__(self, path, where, message):
        self.path = str(path)
        self.where = where
        self.message = message
        super().__init__(f"{path}:{where}: {message}")


class SpeciesCountMismatch(ParseError):
    pass


class NonNumericRow(ParseError):
    pass


class ZeroVolumeLattice(ParseError):
    pass


def element_mass(symbol: str) -> float:
    try:
        return ELEMENT_MASSES[symbol]
    except KeyError:
        raise KeyError(f"no built-in mass for element {symbol!r}; give masses explicitly") from None


def _read_json(path, kind):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ParseError(path, 1, "top level must be an object")
    if data.get("kind", kind) != kind:
        raise ParseError(path, "kind", f"expected kind {kind!r}, got {data.get('kind')!r}")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(path, "schema_version", f"unsupported schema_version {version!r}")
    return data


def _require(data, key, path):
    if key not in data:
        raise ParseError(path, key, f"missing required key {key!r}")
    return data[key]


def _array(value, path, where, shape=None, dtype=float):
    try:
        arr = np.array(value, dtype=dtype)
    except (TypeError, ValueError):
        raise NonNumericRow(path, where, "non-numeric entries") from None
    if shape is not None and arr.shape != shape:
        raise ParseError(path, where, f"expected shape {shape}, got {arr.shape}")
    return arr


def _write_json(data, path):
    Path(path).write_text(json.dumps(data, indent=1) + "\n")


def _is_json(path) -> bool:
    with open(path, "r") as fh:
        head = fh.read(256).lstrip()
    return head.startswith("{")


# -- structures --------------------------------------------------------------


def parse_poscar(path, label: Optional[str] = None) -> CrystalStructure:
    path = Path(path)
    lines = path.read_text().splitlines()
    if len(lines) < 8:
        raise ParseError(path, len(lines), "file too short for the POSCAR layout")

    def floats(idx, count=None):
        parts = lines[idx].split()
        if count is not None:
            parts = parts[:count]
        try:
            vals = [float(x) for x in parts]
        except ValueError:
            raise NonNumericRow(path, idx + 1, f"non-numeric row: {lines[idx]!r}") from None
        if count is not None and len(vals) < count:
            raise NonNumericRow(path, idx + 1, f"expected {count} numbers: {lines[idx]!r}")
        return vals

    comment = lines[0].strip()
    scale = floats(1, 1)[0]
    lattice = np.array([floats(i, 3) for i in (2, 3, 4)])
    vol = np.linalg.det(lattice)
    if abs(vol) < 1e-12:
        raise ZeroVolumeLattice(path, 3, "lattice vectors span zero volume")
    # negative scale is the target cell volume
    factor = (abs(scale) / abs(vol)) ** (1.0 / 3.0) if scale < 0 else scale
    lattice = lattice * factor
    if abs(np.linalg.det(lattice)) < 1e-12:
        raise ZeroVolumeLattice(path, 2, "scale factor gives zero volume")

    species = lines[5].split()
    if not species or any(s[0].isdigit() for s in species):
        raise ParseError(path, 6, "species line missing (element symbols required)")
    try:
        counts = [int(x) for x in lines[6].split()]
    except ValueError:
        raise NonNumericRow(path, 7, f"non-integer atom counts: {lines[6]!r}") from None
    if len(counts) != len(species):
        raise SpeciesCountMismatch(
            path, 7, f"{len(species)} species but {len(counts)} counts"
        )
    idx = 7
    if lines[idx].strip()[:1].lower() == "s":
        idx += 1  # selective dynamics
    mode = lines[idx].strip()[:1].lower()
    if mode not in ("d", "c", "k"):
        raise ParseError(path, idx + 1, f"expected Direct or Cartesian, got {lines[idx]!r}")
    n = sum(counts)
    start = idx + 1
    if len(lines) < start + n:
        raise SpeciesCountMismatch(
            path, len(lines), f"counts sum to {n} atoms but only {len(lines) - start} rows follow"
        )
    coords = np.array([floats(start + j, 3) for j in range(n)])
    if mode == "d":
        positions = coords @ lattice
    else:
        positions = coords * factor
    symbols = [s for s, c in zip(species, counts) for _ in range(c)]
    try:
        masses = [element_mass(s) for s in symbols]
    except KeyError as exc:
        raise ParseError(path, 6, str(exc)) from None
    return CrystalStructure(lattice, symbols, masses, positions, label or comment)


def parse_structure(path, label: Optional[str] = None) -> CrystalStructure:
    """Read a POSCAR-style or native-JSON structure file."""
    if _is_json(path):
        return _parse_structure_json(path, label)
    return parse_poscar(path, label)


def _parse_structure_json(path, label=None) -> CrystalStructure:
    data = _read_json(path, "structure")
    lattice = _array(_require(data, "lattice", path), path, "lattice", (3, 3))
    species = list(_require(data, "species", path))
    n = len(species)
    coords = _array(_require(data, "positions", path), path, "positions")
    if coords.shape != (n, 3):
        raise SpeciesCountMismatch(path, "positions", f"{n} species but positions shape {coords.shape}")
    if abs(np.linalg.det(lattice)) < 1e-12:
        raise ZeroVolumeLattice(path, "lattice", "lattice vectors span zero volume")
    system = data.get("coordinates", "cartesian")
    if system == "fractional":
        coords = coords @ lattice
    elif system != "cartesian":
        raise ParseError(path, "coordinates", f"unknown coordinate system {system!r}")
    if "masses" in data:
        masses = _array(data["masses"], path, "masses", (n,))
    else:
        try:
            masses = [element_mass(s) for s in species]
        except KeyError as exc:
            raise ParseError(path, "species", str(exc)) from None
    energy = data.get("energy_eV")
    try:
        return CrystalStructure(
            lattice, species, masses, coords, label or data.get("label", ""),
            None if energy is None else float(energy),
        )
    except ValueError as exc:
        raise ParseError(path, "structure", str(exc)) from None


def dump_structure(s: CrystalStructure, path) -> None:
    data = {
        "schema_version": SCHEMA_VERSION,
        "kind": "structure",
        "label": s.label,
        "lattice": s.lattice.tolist(),
        "species": list(s.species),
        "masses": s.masses.tolist(),
        "coordinates": "cartesian",
        "positions": s.positions.tolist(),
    }
    if s.energy is not None:
        data["energy_eV"] = s.energy
    _write_json(data, path)


def dump_poscar(s: CrystalStructure, path) -> None:
    """Write a VASP5-style POSCAR with Cartesian coordinates (species grouped as stored)."""
    groups = []
    for sym in s.species:
        if groups and groups[-1][0] == sym:
            groups[-1][1] += 1
        else:
            groups.append([sym, 1])
    out = [s.label or "structure", "1.0"]
    out += ["  " + " ".join(f"{x:.12f}" for x in row) for row in s.lattice]
    out.append(" ".join(g[0] for g in groups))
    out.append(" ".join(str(g[1]) for g in groups))
    out.append("Cartesian")
    out += ["  " + " ".join(f"{x:.12f}" for x in row) for row in s.positions]
    Path(path).write_text("\n".join(out) + "\n")


# -- phonons -----------------------------------------------------------------


def _normalise_modes(vecs, path):
    flat = vecs.reshape(vecs.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1)
    for k, nk in enumerate(norms):
        if abs(nk - 1.0) >= RENORM_TOL:
            raise ParseError(path, f"eigenvectors[{k}]", f"eigenvector norm {nk:.6f} deviates from 1")
    if np.all(np.abs(norms - 1.0) <= 1e-12):
        return vecs  # keep stored values bit-exact
    return vecs / norms[:, None, None]


def parse_phonons(path) -> PhononModeSet:
    """Read the native phonon schema; frequencies end up in meV."""
    data = _read_json(path, "phonons")
    n = int(_require(data, "natoms", path))
    units = data.get("units", "meV")
    freqs = _array(_require(data, "frequencies", path), path, "frequencies")
    if units == "THz":
        freqs = thz_to_mev(freqs)
    elif units != "meV":
        raise ParseError(path, "units", f"unknown frequency units {units!r}")
    if freqs.shape != (3 * n,):
        raise ParseError(path, "frequencies", f"expected {3 * n} modes, got {freqs.size}")
    vecs = _array(_require(data, "eigenvectors", path), path, "eigenvectors")
    if vecs.shape != (3 * n, n, 3):
        raise ParseError(path, "eigenvectors", f"expected {3 * n} modes of shape ({n}, 3), got {vecs.shape}")
    vecs = _normalise_modes(vecs, path)
    return PhononModeSet(n, freqs, vecs, bool(data.get("mass_weighted", True)))


def parse_phonopy_yaml(path) -> PhononModeSet:
    """Gamma-point modes from a phonopy ``band.yaml``/``qpoints.yaml`` (THz, mass-weighted)."""
    import yaml

    data = yaml.safe_load(Path(path).read_text())
    try:
        block = data["phonon"][0]
        n = int(data["natom"])
        qpos = np.asarray(block.get("q-position", [0.0, 0.0, 0.0]), dtype=float)
        freqs = thz_to_mev([b["frequency"] for b in block["band"]])
        vecs = np.array([[[c[0] for c in atom] for atom in b["eigenvector"]] for b in block["band"]])
    except (KeyError, IndexError, TypeError) as exc:
        raise ParseError(path, "phonon[0]", f"not a phonopy mode file ({exc})") from None
    if np.abs(qpos).max() > 1e-8:
        raise ParseError(path, "phonon[0]", f"first q-point {qpos.tolist()} is not Gamma")
    if vecs.shape != (3 * n, n, 3):
        raise ParseError(path, "eigenvector", f"expected {3 * n} modes, got {vecs.shape[0]}")
    return PhononModeSet(n, freqs, _normalise_modes(vecs, path), True)


def dump_phonons(m: PhononModeSet, path) -> None:
    _write_json(
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "phonons",
            "natoms": m.natoms,
            "units": "meV",
            "mass_weighted": m.mass_weighted,
            "frequencies": m.frequencies.tolist(),
            "eigenvectors": m.eigenvectors.tolist(),
        },
        path,
    )


# -- energetics --------------------------------------------------------------


def parse_energetics(path) -> DefectEnergetics:
    from .energetics import point_charge_correction

    data = _read_json(path, "energetics")
    host = float(_require(data, "host_etot", path))
    estimator = data.get("ecorr_estimator")
    entries = []
    seen = set()
    for idx, item in enumerate(_require(data, "charges", path)):
        where = f"charges[{idx}]"
        try:
            q = int(item["q"])
            etot = float(item["etot"])
        except (KeyError, TypeError, ValueError):
            raise ParseError(path, where, "each charge entry needs numeric 'q' and 'etot'") from None
        if q in seen:
            raise ParseError(path, where, f"duplicate charge state q={q}")
        seen.add(q)
        if "ecorr" in item:
            ecorr = float(item["ecorr"])
        elif estimator is not None:
            ecorr = point_charge_correction(
                q, estimator["madelung"], estimator["eps"], estimator["length_A"], approximate=True
            )
        else:
            ecorr = 0.0
        entries.append(ChargeEntry(q, etot, ecorr))
    stoich = [(k, int(v)) for k, v in _require(data, "stoichiometry", path).items()]
    chem = {}
    for sp, pair in data.get("chem_potentials", {}).items():
        try:
            chem[sp] = (float(pair["rich"]), float(pair["poor"]))
        except (KeyError, TypeError, ValueError):
            raise ParseError(path, f"chem_potentials.{sp}", "needs numeric 'rich' and 'poor'") from None
    for sp, _ in stoich:
        if sp not in chem:
            raise ParseError(path, "chem_potentials", f"missing rich/poor potential for {sp!r}")
    try:
        return DefectEnergetics(
            host, tuple(entries), tuple(stoich), chem,
            float(_require(data, "vbm", path)), float(_require(data, "gap", path)),
            data.get("labels", {}),
        )
    except ValueError as exc:
        raise ParseError(path, "energetics", str(exc)) from None


def dump_energetics(d: DefectEnergetics, path) -> None:
    _write_json(
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "energetics",
            "labels": dict(d.labels),
            "host_etot": d.host_etot,
            "vbm": d.vbm,
            "gap": d.gap,
            "stoichiometry": {s: n for s, n in d.stoichiometry_delta},
            "chem_potentials": {s: {"rich": v[0], "poor": v[1]} for s, v in d.chem_potentials.items()},
            "charges": [{"q": e.q, "etot": e.etot, "ecorr": e.ecorr} for e in d.charge_entries],
        },
        path,
    )


# -- orbitals ----------------------------------------------------------------


def _finish_orbital(path, kpoint, g, coeffs, energy, band, spin):
    norm = float(np.sum(np.abs(coeffs) ** 2))
    if abs(norm - 1.0) >= RENORM_TOL:
        raise ParseError(path, "coefficients", f"orbital norm {norm:.6f} deviates from 1")
    if abs(norm - 1.0) > 1e-12:
        coeffs = coeffs / np.sqrt(norm)
    _, first = np.unique(np.round(g, 8), axis=0, return_index=True)
    if len(first) != len(g):
        dup = sorted(set(range(len(g))) - set(first.tolist()))[0]
        raise ParseError(path, f"G row {dup}", f"duplicate G-vector {g[dup].tolist()}")
    return PlanewaveOrbital(kpoint, g, coeffs, energy, band, spin)


def parse_orbital(path) -> PlanewaveOrbital:
    """Read an orbital in native JSON or the keyword text layout."""
    if _is_json(path):
        data = _read_json(path, "orbital")
        k = _array(_require(data, "kpoint", path), path, "kpoint", (3,))
        g = _array(_require(data, "gvectors", path), path, "gvectors")
        c = _array(_require(data, "coefficients", path), path, "coefficients")
        if g.ndim != 2 or g.shape[1] != 3 or c.shape != (g.shape[0], 2):
            raise ParseError(path, "coefficients", "need M G-vectors and M [re, im] pairs")
        return _finish_orbital(
            path, k, g, c[:, 0] + 1j * c[:, 1], float(_require(data, "energy", path)),
            int(data.get("band", 0)), int(data.get("spin", 0)),
        )
    return _parse_orbital_text(path)


def _parse_orbital_text(path) -> PlanewaveOrbital:
    raw = Path(path).read_text().splitlines()
    rows = [(i + 1, ln.split("#", 1)[0].split()) for i, ln in enumerate(raw)]
    rows = [(i, parts) for i, parts in rows if parts]
    header = {}
    g, c = [], []
    it = iter(rows)
    for lineno, parts in it:
        key = parts[0].lower()
        try:
            if key == "kpoint":
                header["kpoint"] = [float(x) for x in parts[1:4]]
            elif key in ("energy", "band", "spin", "schema_version"):
                header[key] = float(parts[1]) if key == "energy" else int(parts[1])
            elif key == "ncoef":
                m = int(parts[1])
                for _ in range(m):
                    lineno, row = next(it)
                    if len(row) < 5:
                        raise NonNumericRow(path, lineno, "G row needs Gx Gy Gz Re Im")
                    vals = [float(x) for x in row[:5]]
                    g.append(vals[:3])
                    c.append(vals[3] + 1j * vals[4])
            else:
                raise ParseError(path, lineno, f"unknown keyword {parts[0]!r}")
        except StopIteration:
            raise ParseError(path, lineno, "file ended inside the coefficient block") from None
        except (ValueError, IndexError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise NonNumericRow(path, lineno, f"malformed line: {raw[lineno - 1]!r}") from None
    for key in ("kpoint", "energy"):
        if key not in header:
            raise ParseError(path, len(raw), f"missing {key!r} line")
    if not g:
        raise ParseError(path, len(raw), "no plane-wave coefficients")
    return _finish_orbital(
        path, np.array(header["kpoint"]), np.array(g), np.array(c), header["energy"],
        header.get("band", 0), header.get("spin", 0),
    )


def dump_orbital(o: PlanewaveOrbital, path) -> None:
    _write_json(
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "orbital",
            "kpoint": o.kpoint.tolist(),
            "energy": o.energy,
            "band": o.band_index,
            "spin": o.spin_channel,
            "gvectors": o.gvectors.tolist(),
            "coefficients": [[z.real, z.imag] for z in o.coefficients.tolist()],
        },
        path,
    )


def dump_orbital_text(o: PlanewaveOrbital, path) -> None:
    out = [
        f"schema_version {SCHEMA_VERSION}",
        "kpoint " + " ".join(repr(float(x)) for x in o.kpoint),
        f"ncoef {len(o.coefficients)}",
    ]
    for gv, z in zip(o.gvectors, o.coefficients):
        out.append(" ".join(repr(float(x)) for x in (*gv, z.real, z.imag)))
    out += [f"energy {o.energy!r}", f"band {o.band_index}", f"spin {o.spin_channel}"]
    Path(path).write_text("\n".join(out) + "\n")


# -- manifest ----------------------------------------------------------------

DEFAULT_OPTIONS = {
    "grid_step_meV": 0.5,
    "sigma_meV": 3.0,
    "gamma_meV": 1.0,
    "t_max_fs": None,
    "n_t": 2**16,
    "condition": "rich",
    "n_points": 1001,
    "bands": ["O", "C"],
    "workers": 4,
}


class ManifestError(ValueError):
    pass


@dataclass
class DefectInputs:
    label: str
    ground_structure: Path
    excited_structure: Path
    phonons: Path
    refractive_index: float
    energetics: Optional[Path] = None
    orbitals: dict = field(default_factory=dict)  # kind -> {"initial": Path, "final": Path}
    zpl_override: Optional[float] = None
    options: dict = field(default_factory=dict)

    def files(self):
        out = [self.ground_structure, self.excited_structure, self.phonons]
        if self.energetics is not None:
            out.append(self.energetics)
        for pair in self.orbitals.values():
            out += [pair["initial"], pair["final"]]
        return out


@dataclass
class Manifest:
    path: Path
    defects: list
    options: dict
    output_dir: Optional[Path] = None


def parse_manifest(path) -> Manifest:
    """Load a run manifest; every referenced file must exist."""
    path = Path(path)
    try:
        data = _read_json(path, "manifest")
    except (OSError, ParseError) as exc:
        raise ManifestError(str(exc)) from None
    base = path.parent
    options = dict(DEFAULT_OPTIONS)
    unknown = set(data.get("options", {})) - set(DEFAULT_OPTIONS)
    if unknown:
        raise ManifestError(f"{path}: unknown option(s) {sorted(unknown)}")
    options.update(data.get("options", {}))

    def resolve(p):
        q = Path(p)
        return q if q.is_absolute() else base / q

    defects = []
    labels = set()
    for idx, item in enumerate(data.get("defects", [])):
        where = f"{path}:defects[{idx}]"
        try:
            label = str(item["label"])
            d = DefectInputs(
                label=label,
                ground_structure=resolve(item["ground_structure"]),
                excited_structure=resolve(item["excited_structure"]),
                phonons=resolve(item["phonons"]),
                refractive_index=float(item["refractive_index"]),
                energetics=resolve(item["energetics"]) if item.get("energetics") else None,
                orbitals={
                    kind: {"initial": resolve(p["initial"]), "final": resolve(p["final"])}
                    for kind, p in item.get("orbitals", {}).items()
                },
                zpl_override=None if item.get("zpl_eV") is None else float(item["zpl_eV"]),
                options=dict(item.get("options", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{where}: malformed defect entry ({exc})") from None
        if label in labels:
            raise ManifestError(f"{where}: duplicate label {label!r}")
        labels.add(label)
        if not d.refractive_index > 1.0:
            raise ManifestError(f"{where}: refractive_index must exceed 1, got {d.refractive_index}")
        if set(d.orbitals) - {"excitation", "emission"}:
            raise ManifestError(f"{where}: orbital kinds must be 'excitation' or 'emission'")
        bad = set(d.options) - set(DEFAULT_OPTIONS)
        if bad:
            raise ManifestError(f"{where}: unknown option(s) {sorted(bad)}")
        missing = [str(f) for f in d.files() if not f.is_file()]
        if missing:
            raise ManifestError(f"{where}: missing input file(s): {', '.join(missing)}")
        defects.append(d)
    if not defects:
        raise ManifestError(f"{path}: manifest lists no defects")
    out = data.get("output_dir")
    return Manifest(path, defects, options, resolve(out) if out else None)


def dump_manifest(m: Manifest, path) -> None:
    path = Path(path)
    base = path.parent

    def rel(p):
        try:
            return os.path.relpath(p, base)
        except ValueError:
            return str(p)

    defects = []
    for d in m.defects:
        item = {
            "label": d.label,
            "ground_structure": rel(d.ground_structure),
            "excited_structure": rel(d.excited_structure),
            "phonons": rel(d.phonons),
            "refractive_index": d.refractive_index,
        }
        if d.energetics is not None:
            item["energetics"] = rel(d.energetics)
        if d.orbitals:
            item["orbitals"] = {
                k: {"initial": rel(v["initial"]), "final": rel(v["final"])} for k, v in d.orbitals.items()
            }
        if d.zpl_override is not None:
            item["zpl_eV"] = d.zpl_override
        if d.options:
            item["options"] = d.options
        defects.append(item)
    data = {"schema_version": SCHEMA_VERSION, "kind": "manifest", "defects": defects}
    overrides = {k: v for k, v in m.options.items() if DEFAULT_OPTIONS.get(k) != v}
    if overrides:
        data["options"] = overrides
    if m.output_dir is not None:
        data["output_dir"] = rel(m.output_dir)
    _write_json(data, path)

