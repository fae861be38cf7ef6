"""Physical constants and unit conversions.

Internally every module works in natural units with hbar = c = 1 and the
electron mass as the energy scale, i.e. m = 1.  Quantities enter and leave
through this module: energies in eV (or multiples), rates in 1/s,
intensities in W/cm^2.
"""

import math

# CODATA-style inputs, in eV and eV s.
ELECTRON_MASS_EV = 510998.95
HBAR_EV_S = 6.582119569e-16
ALPHA_FS = 0.0072973525693

# Electron charge in Heaviside-Lorentz natural units; the sign convention
# (e < 0) matters in vertex factors and Bessel arguments.
E_CHARGE = -math.sqrt(4.0 * math.pi * ALPHA_FS)

# One natural rate unit (m c^2 / hbar) expressed in 1/s.
RATE_UNIT_PER_S = ELECTRON_MASS_EV / HBAR_EV_S

ELECTRON_MASS_MEV = ELECTRON_MASS_EV * 1e-6

_EV_PER = {
    "ev": 1.0,
    "kev": 1e3,
    "mev": 1e6,
    "gev": 1e9,
}


def ev(value_ev: float) -> float:
    """Convert an energy given in eV to natural units (units of m)."""
    return value_ev / ELECTRON_MASS_EV


def to_ev(value_natural: float) -> float:
    """Convert an energy in units of m back to eV."""
    return value_natural * ELECTRON_MASS_EV


def energy_from(value: float, unit: str) -> float:
    """Energy with an explicit unit string -> natural units."""
    try:
        scale = _EV_PER[unit.lower()]
    except KeyError:
        raise ValueError(f"unknown energy unit {unit!r}") from None
    return ev(value * scale)


def rate_to_per_s(rate_natural: float) -> float:
    """Rate in natural units -> 1/s."""
    return rate_natural * RATE_UNIT_PER_S


def rate_density_to_si(density_natural: float) -> float:
    """Spectral rate density (per unit m of photon energy) -> 1/(s MeV).

    Angular measures (per steradian) pass through unchanged.
    """
    return density_natural * RATE_UNIT_PER_S / ELECTRON_MASS_MEV


# Intensity conversion: 1 eV^4 of energy flux in W/cm^2.
_HBARC_EV_CM = 1.973269804e-5  # hbar c in eV cm
_EV_J = 1.602176634e-19
EV4_TO_W_CM2 = _EV_J / (_HBARC_EV_CM**2 * HBAR_EV_S)
