"""Shared fixtures: the default interaction geometry used across the suite.

Head-on collision of a 1000 m_e electron with a 2.5 eV, xi = 1 linearly
polarized wave.  Engines are session-scoped; they are cheap to build but
sharing them keeps the Bessel caches warm.
"""

import numpy as np
import pytest

from dcompton import units
from dcompton.amplitude import AmplitudeEngine
from dcompton.kinematics import LaserConfig, head_on_electron


ELECTRON_ENERGY = 1000.0
OMEGA_EV = 2.5


@pytest.fixture(scope="session")
def laser() -> LaserConfig:
    return LaserConfig(omega=units.ev(OMEGA_EV), xi=1.0)


@pytest.fixture(scope="session")
def electron(laser):
    return head_on_electron(ELECTRON_ENERGY, laser)


@pytest.fixture(scope="session")
def engine(laser, electron) -> AmplitudeEngine:
    return AmplitudeEngine(laser, electron)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20260814)


def sample_detector_points(rng, count, *, n_lo=1, n_hi=6):
    """Random (n, omega_b, theta_b, psi_b, theta_c, psi_c) inside the cuts.

    omega_b is drawn log-uniformly over [1 keV, 1 MeV], angles uniformly
    over the backscattering cone, azimuths over the full circle.
    """
    n = rng.integers(n_lo, n_hi + 1, size=count)
    omega_b = units.ev(np.exp(rng.uniform(np.log(1e3), np.log(1e6), size=count)))
    theta_b = rng.uniform(1e-4, 1.5e-3, size=count)
    theta_c = rng.uniform(1e-4, 1.5e-3, size=count)
    psi_b = rng.uniform(0.0, 2.0 * np.pi, size=count)
    psi_c = rng.uniform(0.0, 2.0 * np.pi, size=count)
    return n, omega_b, theta_b, psi_b, theta_c, psi_c
