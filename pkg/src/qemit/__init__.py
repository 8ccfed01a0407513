"""Post-processing of first-principles outputs for point-defect quantum emitters."""

from .constants import UNITS, energy_to_wavelength, wavelength_to_energy
from .model import (
    ChargeEntry,
    CrystalStructure,
    DefectEnergetics,
    PhononModeSet,
    PlanewaveOrbital,
    Spectrum,
    TransitionDipole,
)

__version__ = "0.1.0"

__all__ = [
    "UNITS",
    "energy_to_wavelength",
    "wavelength_to_energy",
    "ChargeEntry",
    "CrystalStructure",
    "DefectEnergetics",
    "PhononModeSet",
    "PlanewaveOrbital",
    "Spectrum",
    "TransitionDipole",
]
