import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from qemit import energetics as en
from qemit import synthetic, writers
from qemit.constants import UNITS
from qemit.model import Spectrum

SVG = "{http://www.w3.org/2000/svg}"


def small_spectrum():
    return Spectrum(np.array([0.79, 0.80, 0.81]), np.array([0.2, 1.0, 0.1]), 0.80, 3.0, np.exp(-3.0), 3.0, 1.0)


def test_three_point_spectrum_csv(tmp_path):
    p = tmp_path / "s.csv"
    text = writers.write_spectrum_csv(small_spectrum(), p)
    assert p.read_text() == text
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert body[0] == "energy_eV,wavelength_nm,intensity"
    assert len(body) == 4
    rows = writers.read_csv(p)
    assert [float(r["energy_eV"]) for r in rows] == [0.79, 0.80, 0.81]
    assert float(rows[1]["wavelength_nm"]) == pytest.approx(UNITS.eV_nm / 0.80, rel=1e-11)


def test_csv_metadata_comments():
    text = writers.write_spectrum_csv(small_spectrum(), meta={"label": "X"})
    meta = dict(ln[2:].split("=", 1) for ln in text.splitlines() if ln.startswith("# "))
    assert meta["label"] == "X"
    assert meta["zpl_eV"] == "0.8"
    assert float(meta["hr_total"]) == 3.0
    assert meta["gamma_meV"] == "1"


def test_number_format():
    assert writers.fmt(None) == ""
    assert writers.fmt(0.0) == "0"
    assert writers.fmt(-0.0) == "0"
    assert writers.fmt(3) == "3"
    assert writers.fmt(1 / 3) == "0.333333333333"
    assert writers.fmt(np.float64(1e-20)) == "1e-20"


def test_svg_band_rectangles():
    text = writers.write_svg_plot(small_spectrum(), ("O", "C"))
    root = ET.fromstring(text)
    bands = {r.get("data-band"): r for r in root.iter(f"{SVG}rect") if r.get("class") == "band"}
    assert set(bands) == {"O", "C"}
    assert (float(bands["O"].get("data-nm-min")), float(bands["O"].get("data-nm-max"))) == (1260, 1360)
    assert (float(bands["C"].get("data-nm-min")), float(bands["C"].get("data-nm-max"))) == (1530, 1565)
    # the drawn width is proportional to the band width
    w = {k: float(v.get("width")) for k, v in bands.items()}
    assert w["O"] / w["C"] == pytest.approx(100 / 35, rel=1e-3)
    assert root.find(f"{SVG}polyline[@class='spectrum']") is not None


def test_svg_without_bands():
    root = ET.fromstring(writers.write_svg_plot(small_spectrum(), ()))
    assert not [r for r in root.iter(f"{SVG}rect") if r.get("class") == "band"]


def test_diagram_csv_and_svg(tmp_path):
    d = synthetic.toy_energetics("WSe2")
    dg = en.stability_diagram(d, "rich", 101)
    text = writers.write_diagram_csv(dg, tmp_path / "f.csv")
    assert "# condition=rich" in text
    ctl_line = [ln for ln in text.splitlines() if ln.startswith("# ctls=")][0]
    assert re.search(r"\(0\|-1\)=0\.9\b", ctl_line)
    rows = writers.read_csv(tmp_path / "f.csv")
    assert len(rows) == 101
    assert list(rows[0]) == ["fermi_eV", "Ef_q+1", "Ef_q0", "Ef_q-1", "Ef_q-2", "stable_q"]
    assert rows[0]["stable_q"] == "0" and rows[-1]["stable_q"] == "-2"

    svg = writers.write_diagram_svg([dg, en.stability_diagram(d, "poor", 101)])
    root = ET.fromstring(svg)
    envs = [p for p in root.iter(f"{SVG}polyline") if p.get("class") == "envelope"]
    assert [p.get("data-condition") for p in envs] == ["rich", "poor"]
    circles = [c for c in root.iter(f"{SVG}circle") if c.get("class") == "ctl"]
    assert len(circles) == 2 * len(dg.ctls)
