"""Command-line entry point: ``qemit <subcommand> ...``.

Exit codes: 0 success, 1 computation failure, 2 usage or input failure.
The default output directory comes from ``$QEMIT_OUT`` (else ``./qemit_out``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import energetics as en
from . import lineshape as ls
from . import optics, parsers, report, writers
from .constants import UNITS
from .writers import _q

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2
OUT_ENV = "QEMIT_OUT"


class UsageError(Exception):
    pass


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "qemit_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _lineshape_flags(p):
    d = parsers.DEFAULT_OPTIONS
    p.add_argument("--grid-step-meV", type=float, default=None, help=f"phonon grid step (default {d['grid_step_meV']})")
    p.add_argument("--sigma-meV", type=float, default=None, help=f"Gaussian smearing (default {d['sigma_meV']})")
    p.add_argument("--gamma-meV", type=float, default=None, help=f"ZPL Lorentzian HWHM (default {d['gamma_meV']})")
    p.add_argument("--tmax-fs", type=float, default=None, help="time cutoff (default: min(20 hbar/gamma, recurrence cap))")


def _opt(args, key, attr):
    v = getattr(args, attr, None)
    return parsers.DEFAULT_OPTIONS[key] if v is None else v


def cmd_formation(args) -> int:
    d = parsers.parse_energetics(args.energetics)
    out = _out_dir(args)
    diagrams = [en.stability_diagram(d, c, args.n_points) for c in (args.condition,) + tuple(
        c for c in en.CONDITIONS if c != args.condition)]
    main = diagrams[0]
    writers.write_diagram_csv(main, out / "formation.csv")
    writers.write_diagram_svg(diagrams, out / "formation.svg", "formation energy")
    for c in main.ctls:
        print(f"({_q(c.q_hi)}|{_q(c.q_lo)}) {c.fermi_level:.3f} eV")
    print("stable:", " ".join(_q(q) for q in main.stable_charges))
    return EXIT_OK


def cmd_ctl(args) -> int:
    d = parsers.parse_energetics(args.energetics)
    for q in (args.q1, args.q2):
        if q not in d.charges:
            raise UsageError(f"charge state {q} not in {d.charges}")
    print(f"{en.charge_transition_level(d, args.q1, args.q2, args.condition):.3f} eV")
    return EXIT_OK


def cmd_lineshape(args) -> int:
    ground = parsers.parse_structure(args.ground)
    excited = parsers.parse_structure(args.excited)
    modes = parsers.parse_phonons(args.phonons)
    zpl = args.zpl
    if zpl is None:
        if ground.energy is None or excited.energy is None:
            raise UsageError("--zpl is required when the structures carry no energies")
        zpl = excited.energy - ground.energy
    dR = ls.displacement(ground, excited)
    proj = ls.project_modes(dR, ground.masses, modes, exclude=ls.translational_modes(modes, ground.masses))
    summary = ls.hr_summary(proj, ls.mass_weighted_deltaQ(dR, ground.masses))
    sigma, step = _opt(args, "sigma_meV", "sigma_meV"), _opt(args, "grid_step_meV", "grid_step_meV")
    sf = ls.spectral_function(proj, ls.phonon_grid(proj, step, sigma), sigma)
    spec = ls.generating_lineshape(sf, zpl, _opt(args, "gamma_meV", "gamma_meV"), args.tmax_fs, args.n_t)
    out = _out_dir(args)
    writers.write_modes_csv(proj, out / "modes.csv")
    writers.write_spectrum_csv(spec, out / "spectrum.csv")
    writers.write_svg_plot(spec, ("O", "C"), out / "spectrum.svg")
    peak = spec.energies[int(np.argmax(spec.intensities))]
    print(f"Q = {summary.deltaQ:.4f} amu^1/2 A  HR = {summary.S_total:.4f}  DW = {summary.dw:.4f}")
    print(f"ZPL = {zpl:.4f} eV ({UNITS.eV_nm / zpl:.1f} nm)  peak at {peak:.4f} eV")
    return EXIT_OK


def _dipole(args):
    return optics.transition_dipole(parsers.parse_orbital(args.final), parsers.parse_orbital(args.initial), args.kind)


def cmd_dipole(args) -> int:
    dip = _dipole(args)
    if dip.r == 0:
        print(f"{dip.kind}: r = 0 (orientation undefined)")
    else:
        print(f"{dip.kind}: r = {dip.r:.6g} e A  theta = {dip.theta_deg:.2f} deg  phi = {dip.phi_deg:.2f} deg")
    return EXIT_OK


def cmd_lifetime(args) -> int:
    if args.mu_sq is not None:
        mu_sq = args.mu_sq
    elif args.initial and args.final:
        mu_sq = _dipole(args).r ** 2
    else:
        raise UsageError("give --mu-sq or both --initial and --final")
    res = optics.radiative_lifetime(args.zpl, mu_sq, args.n_d)
    if res.lifetime_ns is None:
        print(f"lifetime: infinite ({res.note})")
    else:
        print(f"rate = {res.rate:.6g} 1/ns  lifetime = {res.lifetime_ns:.6g} ns")
    return EXIT_OK


def cmd_report(args) -> int:
    overrides = {
        "grid_step_meV": args.grid_step_meV,
        "sigma_meV": args.sigma_meV,
        "gamma_meV": args.gamma_meV,
        "t_max_fs": args.tmax_fs,
        "condition": args.condition,
        "workers": args.workers,
    }
    out = args.out or os.environ.get(OUT_ENV)
    status = report.run_manifest(args.manifest, out, overrides)
    return EXIT_COMPUTE if status else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qemit", description="Quantum-emitter defect photophysics post-processing")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("formation", help="formation-energy lines, CTLs and stability diagram")
    f.add_argument("energetics")
    f.add_argument("--condition", choices=en.CONDITIONS, default="rich")
    f.add_argument("--n-points", type=int, default=1001)
    f.add_argument("--out")
    f.set_defaults(func=cmd_formation)

    c = sub.add_parser("ctl", help="charge transition level between two charge states")
    c.add_argument("energetics")
    c.add_argument("--q1", type=int, required=True)
    c.add_argument("--q2", type=int, required=True)
    c.add_argument("--condition", choices=en.CONDITIONS, default="rich")
    c.set_defaults(func=cmd_ctl)

    s = sub.add_parser("lineshape", help="Huang-Rhys factors and PL spectrum")
    s.add_argument("--ground", required=True)
    s.add_argument("--excited", required=True)
    s.add_argument("--phonons", required=True)
    s.add_argument("--zpl", type=float, help="eV; default from the structures' total energies")
    s.add_argument("--n-t", type=int, default=parsers.DEFAULT_OPTIONS["n_t"])
    _lineshape_flags(s)
    s.add_argument("--out")
    s.set_defaults(func=cmd_lineshape)

    for name, func, hlp in (("dipole", cmd_dipole, "transition dipole and orientation"),
                            ("lifetime", cmd_lifetime, "radiative rate and lifetime")):
        d = sub.add_parser(name, help=hlp)
        d.add_argument("--initial", required=name == "dipole")
        d.add_argument("--final", required=name == "dipole")
        d.add_argument("--kind", choices=("excitation", "emission"), default="emission")
        if name == "lifetime":
            d.add_argument("--zpl", type=float, required=True)
            d.add_argument("--n-d", type=float, required=True, help="refractive index")
            d.add_argument("--mu-sq", type=float, help="squared dipole, (e A)^2")
        d.set_defaults(func=func)

    r = sub.add_parser("report", help="run every defect of a manifest")
    r.add_argument("manifest")
    _lineshape_flags(r)
    r.add_argument("--condition", choices=en.CONDITIONS)
    r.add_argument("--workers", type=int)
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, parsers.ParseError, parsers.ManifestError, OSError, json.JSONDecodeError) as exc:
        print(f"qemit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError, KeyError) as exc:
        print(f"qemit: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
