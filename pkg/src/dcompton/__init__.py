"""Nonperturbative two-photon emission from laser-driven electrons.

The package computes fully differential rates and photon-photon
polarization entanglement for an electron colliding head on with an
intense linearly polarized plane wave, treating the wave exactly through
dressed states.  Natural units with the electron mass set to one are used
internally; converters live in dcompton.units.
"""

from .kinematics import (
    ChannelClosed,
    DressedElectron,
    LaserConfig,
    dress,
    effective_mass,
    head_on_electron,
    laser_from_intensity,
    undressed,
)

__all__ = [
    "ChannelClosed",
    "DressedElectron",
    "LaserConfig",
    "dress",
    "effective_mass",
    "head_on_electron",
    "laser_from_intensity",
    "undressed",
    "__version__",
]

__version__ = "0.1.0"
