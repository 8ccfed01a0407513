import numpy as np
import pytest

from qemit.model import (
    ChargeEntry,
    CrystalStructure,
    DefectEnergetics,
    PhononModeSet,
    PlanewaveOrbital,
    Spectrum,
    TransitionDipole,
)


def cubic(a=3.0):
    return np.eye(3) * a


def test_structure_arrays_are_read_only():
    s = CrystalStructure(cubic(), ["C"], [12.011], [[0.1, 0.2, 0.3]])
    with pytest.raises(ValueError):
        s.positions[0, 0] = 1.0
    with pytest.raises(Exception):
        s.label = "x"


@pytest.mark.parametrize(
    "kwargs, msg",
    [
        (dict(lattice=np.zeros((3, 3))), "singular"),
        (dict(masses=[0.0]), "positive"),
        (dict(positions=[[0, 0, 0], [1, 1, 1]]), "positions"),
        (dict(lattice=np.eye(2)), "3x3"),
    ],
)
def test_structure_validation(kwargs, msg):
    base = dict(lattice=cubic(), species=["C"], masses=[12.0], positions=[[0, 0, 0]])
    base.update(kwargs)
    with pytest.raises(ValueError, match=msg):
        CrystalStructure(**base)


def test_fractional_wrap():
    s = CrystalStructure(cubic(2.0), ["C", "C"], [12, 12], [[-0.2, 0.0, 2.2], [1.0, 1.0, 1.0]])
    assert np.allclose(s.fractional(), [[-0.1, 0, 1.1], [0.5, 0.5, 0.5]])
    assert np.allclose(s.fractional(wrap=True), [[0.9, 0, 0.1], [0.5, 0.5, 0.5]])
    assert np.allclose(s.wrapped().positions, [[1.8, 0, 0.2], [1, 1, 1]])


def _modes(n=2):
    return np.eye(3 * n).reshape(3 * n, n, 3)


def test_phonon_mode_count():
    PhononModeSet(2, np.arange(6.0), _modes())
    with pytest.raises(ValueError, match="expected 6 modes"):
        PhononModeSet(2, np.arange(5.0), _modes()[:5])


def test_phonon_norm_checked():
    v = _modes()
    v[1] *= 1.01
    with pytest.raises(ValueError, match="norm"):
        PhononModeSet(2, np.arange(6.0), v)


def test_phonon_non_orthogonal_warns(caplog):
    v = _modes().reshape(6, 6)
    v[1] = (v[0] + v[1]) / np.sqrt(2)
    PhononModeSet(2, np.arange(6.0), v.reshape(6, 2, 3))
    assert "orthogonality" in caplog.text


def _energetics(**kw):
    args = dict(
        host_etot=-102.0,
        charge_entries=[ChargeEntry(0, -100.0, 0.0), ChargeEntry(-1, -100.0, 0.1)],
        stoichiometry_delta=[("C", 1), ("S", -1)],
        chem_potentials={"C": (-9.0, -10.0), "S": (-4.0, -5.0)},
        vbm=0.0,
        gap=1.8,
    )
    args.update(kw)
    return DefectEnergetics(**args)


def test_energetics_sorted_and_lookup():
    d = _energetics(charge_entries=[(-1, -100.0, 0.1), (0, -100.0, 0.0), (1, -99.0, 0.1)])
    assert d.charges == [1, 0, -1]
    assert d.entry(-1).ecorr == 0.1
    with pytest.raises(KeyError):
        d.entry(-2)


@pytest.mark.parametrize(
    "kw, msg",
    [
        (dict(charge_entries=[(0, -1.0, 0.0), (0, -2.0, 0.0)]), "duplicate"),
        (dict(gap=0.0), "gap"),
        (dict(charge_entries=[(0, -1.0, 0.2)]), "neutral"),
        (dict(charge_entries=[(1, float("nan"), 0.0)]), "non-finite"),
        (dict(chem_potentials={"C": (-9.0, -10.0)}), "chemical potential"),
    ],
)
def test_energetics_validation(kw, msg):
    with pytest.raises(ValueError, match=msg):
        _energetics(**kw)


def test_orbital_norm():
    PlanewaveOrbital(np.zeros(3), [[0, 0, 0]], [1.0], 0.0)
    PlanewaveOrbital(np.zeros(3), [[0, 0, 0], [1, 0, 0]], [2**-0.5, 2**-0.5], 0.0)
    with pytest.raises(ValueError, match="norm"):
        PlanewaveOrbital(np.zeros(3), [[0, 0, 0]], [0.9**0.5 * 0.99], 0.0)
    with pytest.raises(ValueError, match="duplicate"):
        PlanewaveOrbital(np.zeros(3), [[0, 0, 0], [0, 0, 0]], [2**-0.5, 2**-0.5], 0.0)


@pytest.mark.parametrize(
    "mu, theta, phi",
    [((0, 0, 1), 0.0, 0.0), ((1, 1, 0), 90.0, 45.0), ((0, -2j, 0), 90.0, 90.0), ((-1, 0, -1), 45.0, 0.0)],
)
def test_dipole_angles(mu, theta, phi):
    d = TransitionDipole(np.array(mu, dtype=complex))
    assert d.theta_deg == pytest.approx(theta, abs=1e-12)
    assert d.phi_deg == pytest.approx(phi, abs=1e-12)


def test_zero_dipole_has_no_angles():
    d = TransitionDipole(np.zeros(3))
    assert d.r == 0 and d.theta_deg is None and d.phi_deg is None
    with pytest.raises(ValueError):
        d.orientation


def test_spectrum_grid_checks():
    Spectrum(np.array([1.0, 1.1, 1.2]), np.array([0, 1, 0.5]), 1.1, 0.0, 1.0, 3.0, 1.0)
    with pytest.raises(ValueError, match="uniform"):
        Spectrum(np.array([1.0, 1.1, 1.3]), np.ones(3), 1.1, 0.0, 1.0, 3.0, 1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        Spectrum(np.array([1.0, 1.1, 1.2]), np.array([0, -1, 0]), 1.1, 0.0, 1.0, 3.0, 1.0)
