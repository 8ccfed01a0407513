import json

import numpy as np
import pytest
import yaml
from hypothesis import given, settings, HealthCheck, strategies as st

import oracles
from qemit import parsers, synthetic
from qemit.model import CrystalStructure, PlanewaveOrbital

POSCAR_TWO_ATOM = """toy cell
1.0
3.0 0.0 0.0
0.0 3.0 0.0
0.0 0.0 3.0
C S
1 1
Direct
0.0 0.0 0.0
0.5 0.5 0.5
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_poscar_direct(tmp_path):
    s = parsers.parse_structure(write(tmp_path, "POSCAR", POSCAR_TWO_ATOM))
    assert s.species == ("C", "S")
    assert np.allclose(s.positions, [[0, 0, 0], [1.5, 1.5, 1.5]])
    assert s.masses[0] == pytest.approx(12.011)
    assert s.label == "toy cell"


def test_poscar_scale_factor(tmp_path):
    s = parsers.parse_poscar(write(tmp_path, "POSCAR", POSCAR_TWO_ATOM.replace("\n1.0\n", "\n2.0\n", 1)))
    assert np.allclose(s.lattice, np.eye(3) * 6.0)
    assert np.allclose(s.positions[1], [3, 3, 3])


def test_poscar_negative_scale_is_volume(tmp_path):
    s = parsers.parse_poscar(write(tmp_path, "POSCAR", POSCAR_TWO_ATOM.replace("\n1.0\n", "\n-216.0\n", 1)))
    assert abs(np.linalg.det(s.lattice)) == pytest.approx(216.0)


def test_poscar_cartesian_and_selective(tmp_path):
    text = POSCAR_TWO_ATOM.replace("Direct\n0.0 0.0 0.0\n0.5 0.5 0.5", "Selective dynamics\nCartesian\n0 0 0 T T T\n1 1 1 F F F")
    text = text.replace("\n1.0\n", "\n2.0\n", 1)
    s = parsers.parse_poscar(write(tmp_path, "POSCAR", text))
    assert np.allclose(s.positions[1], [2, 2, 2])


@pytest.mark.parametrize(
    "old, new, exc",
    [
        ("1 1\n", "1 2\n", parsers.SpeciesCountMismatch),
        ("C S\n1 1", "C S\n1 1 1", parsers.SpeciesCountMismatch),
        ("0.5 0.5 0.5", "0.5 x 0.5", parsers.NonNumericRow),
        ("0.0 3.0 0.0", "0.0 0.0 0.0", parsers.ZeroVolumeLattice),
    ],
)
def test_poscar_errors(tmp_path, old, new, exc):
    with pytest.raises(exc) as info:
        parsers.parse_poscar(write(tmp_path, "POSCAR", POSCAR_TWO_ATOM.replace(old, new, 1)))
    assert "POSCAR" in str(info.value)


def test_poscar_error_has_line_number(tmp_path):
    with pytest.raises(parsers.NonNumericRow) as info:
        parsers.parse_poscar(write(tmp_path, "POSCAR", POSCAR_TWO_ATOM.replace("0.5 0.5 0.5", "0.5 x 0.5")))
    assert info.value.where == 10


def bilayer_supercell(n=7):
    """2H-like bilayer, n x n x 1, three atoms per layer cell: 6 n^2 atoms."""
    a = 3.18
    cell = np.array([[a, 0, 0], [-a / 2, a * np.sqrt(3) / 2, 0], [0, 0, 30.0]])
    basis = [("W", (0, 0, 0.40)), ("S", (1 / 3, 2 / 3, 0.35)), ("S", (1 / 3, 2 / 3, 0.45)),
             ("W", (1 / 3, 2 / 3, 0.60)), ("S", (0, 0, 0.55)), ("S", (0, 0, 0.65))]
    rows = {"W": [], "S": []}
    for i in range(n):
        for j in range(n):
            for sp, (x, y, z) in basis:
                rows[sp].append(((x + i) / n, (y + j) / n, z))
    lat = cell * np.array([[n], [n], [1]])
    lines = ["WS2 bilayer 7x7x1", "1.0"] + [" ".join(f"{v:.6f}" for v in r) for r in lat]
    lines += ["W S", f"{len(rows['W'])} {len(rows['S'])}", "Direct"]
    lines += [" ".join(f"{v:.8f}" for v in p) for sp in ("W", "S") for p in rows[sp]]
    return "\n".join(lines) + "\n"


def test_bilayer_supercell_294_atoms(tmp_path):
    s = parsers.parse_structure(write(tmp_path, "POSCAR", bilayer_supercell()))
    assert s.natoms == 294
    assert s.species.count("W") == 98 and s.species.count("S") == 196


def test_poscar_round_trip(tmp_path):
    s = parsers.parse_structure(write(tmp_path, "POSCAR", bilayer_supercell(2)))
    parsers.dump_poscar(s, tmp_path / "out")
    t = parsers.parse_poscar(tmp_path / "out")
    assert t.species == s.species
    assert np.allclose(t.positions, s.positions, atol=1e-10)


def test_structure_json_round_trip_is_exact(tmp_path, rng):
    s = synthetic.toy_cell("MoSe2", "middle", rng)
    s = CrystalStructure(s.lattice, s.species, s.masses, s.positions + rng.normal(size=(6, 3)) * 1e-3, "x", -123.456789)
    parsers.dump_structure(s, tmp_path / "s.json")
    t = parsers.parse_structure(tmp_path / "s.json")
    assert np.array_equal(t.positions, s.positions)
    assert np.array_equal(t.lattice, s.lattice)
    assert t.energy == s.energy and t.species == s.species


def test_structure_json_fractional(tmp_path):
    doc = {"schema_version": 1, "kind": "structure", "lattice": np.eye(3).tolist(),
           "species": ["C"], "positions": [[0.5, 0.25, 0.0]], "coordinates": "fractional"}
    write(tmp_path, "s.json", json.dumps(doc))
    assert np.allclose(parsers.parse_structure(tmp_path / "s.json").positions, [[0.5, 0.25, 0]])


def test_structure_json_rejects_bad_version(tmp_path):
    doc = {"schema_version": 99, "kind": "structure"}
    with pytest.raises(parsers.ParseError, match="schema_version"):
        parsers.parse_structure(write(tmp_path, "s.json", json.dumps(doc)))


def diatomic_modes(freqs=(0, 0, 0, 0, 0, 50.0), units="meV", scale=1.0):
    vecs = (np.eye(6) * scale).reshape(6, 2, 3).tolist()
    return {"schema_version": 1, "kind": "phonons", "natoms": 2, "units": units,
            "frequencies": list(freqs), "eigenvectors": vecs}


def test_phonons_load(tmp_path):
    m = parsers.parse_phonons(write(tmp_path, "p.json", json.dumps(diatomic_modes())))
    assert m.nmodes == 6 and m.frequencies[-1] == 50.0


def test_phonons_wrong_count(tmp_path):
    doc = diatomic_modes(freqs=(1, 2, 3, 4, 5))
    with pytest.raises(parsers.ParseError, match="expected 6 modes"):
        parsers.parse_phonons(write(tmp_path, "p.json", json.dumps(doc)))


def test_phonons_thz(tmp_path):
    doc = diatomic_modes(freqs=(0, 0, 0, 0, 0, 10.0), units="THz")
    m = parsers.parse_phonons(write(tmp_path, "p.json", json.dumps(doc)))
    assert m.frequencies[-1] == pytest.approx(41.357, abs=5e-4)
    assert m.frequencies[-1] == pytest.approx(oracles.H * 10e12 / oracles.E * 1e3, rel=1e-9)


def test_phonons_renormalise_small_drift(tmp_path):
    m = parsers.parse_phonons(write(tmp_path, "p.json", json.dumps(diatomic_modes(scale=1.0004))))
    assert np.allclose(np.linalg.norm(m.eigenvectors.reshape(6, 6), axis=1), 1.0)
    with pytest.raises(parsers.ParseError, match="norm"):
        parsers.parse_phonons(write(tmp_path, "q.json", json.dumps(diatomic_modes(scale=1.01))))


def test_phonons_round_trip_is_exact(tmp_path, rng):
    cell = synthetic.toy_cell(rng=rng)
    m = synthetic.orthonormal_modes(cell.masses, synthetic.toy_frequencies(), rng)
    parsers.dump_phonons(m, tmp_path / "p.json")
    back = parsers.parse_phonons(tmp_path / "p.json")
    assert np.array_equal(back.eigenvectors, m.eigenvectors)
    assert np.array_equal(back.frequencies, m.frequencies)


def test_phonopy_yaml(tmp_path):
    bands = []
    for k in range(6):
        vec = np.eye(6)[k].reshape(2, 3)
        bands.append({"frequency": float(k), "eigenvector": [[[x, 0.0] for x in atom] for atom in vec.tolist()]})
    doc = {"natom": 2, "phonon": [{"q-position": [0, 0, 0], "band": bands}]}
    p = write(tmp_path, "band.yaml", yaml.safe_dump(doc))
    m = parsers.parse_phonopy_yaml(p)
    assert m.frequencies[1] == pytest.approx(parsers.thz_to_mev(1.0))
    assert m.mass_weighted
    doc["phonon"][0]["q-position"] = [0.5, 0, 0]
    p = write(tmp_path, "band.yaml", yaml.safe_dump(doc))
    with pytest.raises(parsers.ParseError, match="not Gamma"):
        parsers.parse_phonopy_yaml(p)


def energetics_doc(charges):
    return {
        "schema_version": 1, "kind": "energetics", "host_etot": -102.0, "vbm": 0.0, "gap": 1.8,
        "stoichiometry": {"C": 1, "S": -1},
        "chem_potentials": {"C": {"rich": -9.0, "poor": -10.0}, "S": {"rich": -4.0, "poor": -5.0}},
        "charges": charges,
    }


def test_energetics_two_states(tmp_path):
    doc = energetics_doc([{"q": 0, "etot": -100.0}, {"q": -1, "etot": -100.0, "ecorr": 0.1}])
    d = parsers.parse_energetics(write(tmp_path, "e.json", json.dumps(doc)))
    assert d.charges == [0, -1]


def test_energetics_duplicate_charge(tmp_path):
    doc = energetics_doc([{"q": -1, "etot": -100.0}, {"q": -1, "etot": -99.0}])
    with pytest.raises(parsers.ParseError, match="duplicate"):
        parsers.parse_energetics(write(tmp_path, "e.json", json.dumps(doc)))


def test_energetics_four_states_round_trip(tmp_path):
    d = synthetic.toy_energetics("WS2")
    assert d.charges == [1, 0, -1, -2]
    parsers.dump_energetics(d, tmp_path / "e.json")
    assert parsers.parse_energetics(tmp_path / "e.json") == d


def test_energetics_point_charge_estimate(tmp_path):
    doc = energetics_doc([{"q": 0, "etot": -100.0}, {"q": -1, "etot": -100.0}])
    doc["ecorr_estimator"] = {"madelung": 2.8, "eps": 10.0, "length_A": 20.0}
    d = parsers.parse_energetics(write(tmp_path, "e.json", json.dumps(doc)))
    assert d.entry(-1).ecorr == pytest.approx(2.8 * 14.399645 / 400.0, rel=1e-6)
    assert d.entry(0).ecorr == 0.0


def test_energetics_missing_chem_potential(tmp_path):
    doc = energetics_doc([{"q": 0, "etot": -100.0}])
    del doc["chem_potentials"]["S"]
    with pytest.raises(parsers.ParseError, match="'S'"):
        parsers.parse_energetics(write(tmp_path, "e.json", json.dumps(doc)))


orbital_coeffs = st.lists(
    st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=6
).filter(lambda c: sum(a * a + b * b for a, b in c) > 1e-3)


@settings(max_examples=40, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(orbital_coeffs, st.sampled_from(["json", "text"]))
def test_orbital_round_trip(tmp_path, coeffs, fmt):
    c = np.array([a + 1j * b for a, b in coeffs])
    c /= np.linalg.norm(c)
    g = np.arange(3 * len(c), dtype=float).reshape(-1, 3) * 0.61
    o = PlanewaveOrbital(np.array([0.0, 0.1, 0.0]), g, c, -0.25, 4, 1)
    path = tmp_path / f"o.{fmt}"
    (parsers.dump_orbital if fmt == "json" else parsers.dump_orbital_text)(o, path)
    back = parsers.parse_orbital(path)
    assert np.array_equal(back.coefficients, o.coefficients)
    assert np.array_equal(back.gvectors, o.gvectors)
    assert (back.energy, back.band_index, back.spin_channel) == (-0.25, 4, 1)


def test_orbital_norm_rejected(tmp_path):
    text = "kpoint 0 0 0\nenergy 0.1\nncoef 1\n0 0 0 0.9486832980505138 0.0\n"
    with pytest.raises(parsers.ParseError, match="norm"):
        parsers.parse_orbital(write(tmp_path, "o.txt", text))


def test_orbital_text_errors(tmp_path):
    text = "# test\nkpoint 0 0 0\nenergy 0.1\nncoef 2\n0 0 0 1 0\n1 0 zz 0 0\n"
    with pytest.raises(parsers.NonNumericRow) as info:
        parsers.parse_orbital(write(tmp_path, "o.txt", text))
    assert info.value.where == 6
    with pytest.raises(parsers.ParseError, match="ended"):
        parsers.parse_orbital(write(tmp_path, "p.txt", "kpoint 0 0 0\nenergy 0\nncoef 3\n0 0 0 1 0\n"))
    with pytest.raises(parsers.ParseError, match="duplicate"):
        parsers.parse_orbital(write(tmp_path, "q.txt", "kpoint 0 0 0\nenergy 0\nncoef 2\n0 0 0 0.6 0\n0 0 0 0.8 0\n"))


def test_manifest_round_trip(reference_suite, tmp_path):
    m = parsers.parse_manifest(reference_suite)
    assert len(m.defects) == 16
    assert all(d.ground_structure.is_file() for d in m.defects)


def test_manifest_errors(reference_suite, tmp_path):
    data = json.loads(reference_suite.read_text())
    base = reference_suite.parent

    def check(mutate, msg):
        doc = json.loads(json.dumps(data))
        mutate(doc)
        p = base / "bad_manifest.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(parsers.ManifestError, match=msg):
            parsers.parse_manifest(p)

    check(lambda d: d["defects"][0].update(phonons="nope.json"), "missing input")
    check(lambda d: d["defects"][1].update(label=d["defects"][0]["label"]), "duplicate label")
    check(lambda d: d.update(options={"sigma": 1.0}), "unknown option")
    check(lambda d: d["defects"][0].update(refractive_index=0.9), "refractive_index")
    check(lambda d: d.update(defects=[]), "no defects")
    with pytest.raises(parsers.ManifestError):
        parsers.parse_manifest(tmp_path / "absent.json")
