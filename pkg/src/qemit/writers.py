"""CSV and SVG output. Floats are written with 12 significant digits.

Per-artifact CSVs may start with ``# key=value`` provenance lines before the
column header; the column header is always the first non-comment line.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .constants import UNITS

# telecom windows, nm
BANDS = {
    "O": (1260.0, 1360.0, "#7fd38a"),
    "C": (1530.0, 1565.0, "#f4a6c6"),
}


def _q(q: int) -> str:
    return f"{q:+d}" if q else "0"


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if x == 0.0:
        return "0"
    return f"{x:.12g}"


def rows_text(header, rows, meta=None) -> str:
    buf = io.StringIO()
    for key, val in (meta or {}).items():
        buf.write(f"# {key}={val}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def _emit(text, path):
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(path):
    """Rows of a CSV written here, skipping provenance comments."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_spectrum_csv(s, path=None, meta=None) -> str:
    rows = zip(s.energies, UNITS.eV_nm / s.energies, s.intensities)
    meta = dict(meta or {})
    meta.setdefault("zpl_eV", fmt(s.zpl))
    meta.setdefault("hr_total", fmt(s.hr_total))
    meta.setdefault("dw", fmt(s.dw))
    meta.setdefault("sigma_meV", fmt(s.smearing_meV))
    meta.setdefault("gamma_meV", fmt(s.gamma_meV))
    return _emit(rows_text(["energy_eV", "wavelength_nm", "intensity"], rows, meta), path)


def write_modes_csv(projections, path=None, meta=None) -> str:
    rows = ((p.mode_index, p.hbar_omega, p.q_k, p.s_k) for p in projections)
    return _emit(rows_text(["mode", "hbar_omega_meV", "q_k", "s_k"], rows, meta), path)


def write_diagram_csv(diagram, path=None, meta=None) -> str:
    header = ["fermi_eV"] + [f"Ef_q{ln.q:+d}" if ln.q else "Ef_q0" for ln in diagram.lines] + ["stable_q"]
    rows = []
    for x, q in zip(diagram.fermi_grid, diagram.stable_grid):
        rows.append([x, *[ln(x) for ln in diagram.lines], int(q)])
    meta = dict(meta or {})
    meta.setdefault("condition", diagram.condition)
    meta.setdefault("ctls", ";".join(f"({_q(c.q_hi)}|{_q(c.q_lo)})={fmt(c.fermi_level)}" for c in diagram.ctls))
    return _emit(rows_text(header, rows, meta), path)


# -- SVG ---------------------------------------------------------------------

_W, _H = 640, 400
_L, _R, _T, _B = 60, 20, 20, 50


class _Axes:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim

    def x(self, v):
        return _L + (v - self.x0) / (self.x1 - self.x0) * (_W - _L - _R)

    def y(self, v):
        return _H - _B - (v - self.y0) / (self.y1 - self.y0) * (_H - _T - _B)


def _svg_doc(body, title):
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">\n<title>{escape(title)}</title>\n'
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def _frame(ax, xlabel, ylabel, nticks=5):
    out = [
        f'<rect x="{_L}" y="{_T}" width="{_W - _L - _R}" height="{_H - _T - _B}" '
        'fill="none" stroke="black"/>'
    ]
    for v in np.linspace(ax.x0, ax.x1, nticks):
        out.append(
            f'<text x="{ax.x(v):.2f}" y="{_H - _B + 16}" font-size="11" text-anchor="middle">{v:.4g}</text>'
        )
    for v in np.linspace(ax.y0, ax.y1, nticks):
        out.append(f'<text x="{_L - 6}" y="{ax.y(v) + 4:.2f}" font-size="11" text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{(_L + _W - _R) / 2}" y="{_H - 12}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="14" y="{(_T + _H - _B) / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {(_T + _H - _B) / 2})">{escape(ylabel)}</text>'
    )
    return out


def _polyline(ax, xs, ys, color="black", dash=None, attrs=""):
    pts = " ".join(f"{ax.x(a):.2f},{ax.y(b):.2f}" for a, b in zip(xs, ys))
    style = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{style}{attrs} points="{pts}"/>'


def write_svg_plot(s, bands=("O", "C"), path=None, title="PL spectrum") -> str:
    """PL intensity versus wavelength with optional shaded telecom bands."""
    nm = UNITS.eV_nm / s.energies
    keep = s.intensities >= 1e-4
    lo, hi = (nm[keep].min(), nm[keep].max()) if keep.any() else (nm.min(), nm.max())
    for b in bands:
        lo, hi = min(lo, BANDS[b][0]), max(hi, BANDS[b][1])
    pad = 0.02 * (hi - lo)
    ax = _Axes((lo - pad, hi + pad), (0.0, 1.05))
    body = []
    for b in bands:
        a, c, color = BANDS[b]
        body.append(
            f'<rect class="band" data-band="{b}" data-nm-min="{fmt(a)}" data-nm-max="{fmt(c)}" '
            f'x="{ax.x(a):.2f}" y="{_T}" width="{ax.x(c) - ax.x(a):.2f}" height="{_H - _T - _B}" '
            f'fill="{color}" fill-opacity="0.35" stroke="none"/>'
        )
    sel = (nm >= ax.x0) & (nm <= ax.x1)
    order = np.argsort(nm[sel])
    body.append(_polyline(ax, nm[sel][order], s.intensities[sel][order], attrs=' class="spectrum"'))
    body += _frame(ax, "wavelength (nm)", "PL intensity (arb. units)")
    return _emit(_svg_doc(body, title), path)


def write_diagram_svg(diagrams, path=None, title="formation energy") -> str:
    """Formation energy versus Fermi level; several conditions drawn with different dashes."""
    if not isinstance(diagrams, (list, tuple)):
        diagrams = [diagrams]
    gap = diagrams[0].gap
    vals = [ln(x) for d in diagrams for ln in d.lines for x in (0.0, gap)]
    env = [d.line(d.stable_charge(x))(x) for d in diagrams for x in d.fermi_grid]
    ymin, ymax = min(env) - 0.5, max(max(env) + 1.0, min(vals) + 0.5)
    ax = _Axes((0.0, gap), (ymin, ymax))
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    body = []
    for di, d in enumerate(diagrams):
        dash = None if di == 0 else "6,4"
        for li, ln in enumerate(d.lines):
            xs = np.array([0.0, gap])
            body.append(
                _polyline(ax, xs, np.clip(ln(xs), ymin, ymax), palette[li % len(palette)], dash,
                          f' class="line" data-q="{ln.q}" data-condition="{d.condition}" stroke-opacity="0.5"')
            )
        xs = d.fermi_grid
        ys = [d.line(d.stable_charge(x))(x) for x in xs]
        body.append(_polyline(ax, xs, ys, "black", dash, f' class="envelope" data-condition="{d.condition}"'))
        for c in d.ctls:
            body.append(
                f'<circle class="ctl" data-levels="{c.q_hi}|{c.q_lo}" cx="{ax.x(c.fermi_level):.2f}" '
                f'cy="{ax.y(d.line(c.q_hi)(c.fermi_level)):.2f}" r="3" fill="black"/>'
            )
    body += _frame(ax, "Fermi level (eV)", "formation energy (eV)")
    return _emit(_svg_doc(body, title), path)
