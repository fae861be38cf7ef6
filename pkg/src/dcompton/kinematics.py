"""Laser dressing and two-photon emission kinematics.

GEOMETRY
    The electron travels along +x^3 with energy E_i; the plane wave travels
    along -x^3 (head-on), is linearly polarized along x^1, and has photon
    energy omega and intensity parameter xi.  Emitted photons are labelled
    b and c; photon b carries the independently chosen (omega_b, theta_b,
    psi_b), photon c the direction (theta_c, psi_c) with omega_c fixed by
    energy-momentum conservation of quasimomenta,

        q_i + n kappa = q_f + k_b + k_c .

UNITS
    Natural units with the electron mass m = 1 throughout this module;
    conversions live in units.py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import units
from .fourvec import fv, lightlike, mdot, msq, pol_basis, unit_lightlike


class ChannelClosed(Exception):
    """Emission of photon c is kinematically impossible at this point."""


@dataclass(frozen=True)
class LaserConfig:
    """Monochromatic linearly polarized plane wave.

    omega: photon energy in units of m.  xi: dimensionless intensity
    parameter xi = |e| sqrt(|a.a| / 2) / m, which fixes the four-potential
    amplitude a = (0, a1, 0, 0).
    """

    omega: float
    xi: float

    @property
    def kappa(self) -> np.ndarray:
        return fv(self.omega, 0.0, 0.0, -self.omega)

    @property
    def a(self) -> np.ndarray:
        a1 = math.sqrt(2.0) * self.xi / abs(units.E_CHARGE)
        return fv(0.0, a1, 0.0, 0.0)

    @property
    def e_charge(self) -> float:
        return units.E_CHARGE

    @property
    def a_sq(self) -> float:
        return -2.0 * self.xi**2 / units.E_CHARGE**2

    @property
    def e2a2(self) -> float:
        """e^2 a.a = -2 m^2 xi^2, the only combination the dynamics needs."""
        return -2.0 * self.xi**2

    @property
    def m_star(self) -> float:
        return effective_mass(self.xi)

    @property
    def intensity_w_cm2(self) -> float:
        """Cycle-averaged intensity in the peak-normalized a0 convention.

        I = (m omega xi)^2 / (8 pi alpha), i.e. the usual
        xi ~ 0.85 sqrt(I[1e18 W/cm^2]) lambda[um] relation.
        """
        i_ev4 = (units.ELECTRON_MASS_EV * units.to_ev(self.omega)
                 * self.xi) ** 2 / (8.0 * math.pi * units.ALPHA_FS)
        return i_ev4 * units.EV4_TO_W_CM2

    def with_xi(self, xi: float) -> "LaserConfig":
        return replace(self, xi=xi)


def laser_from_intensity(omega_ev: float, xi: float) -> LaserConfig:
    """Build the wave from its photon energy in eV and xi."""
    if omega_ev <= 0:
        raise ValueError("laser photon energy must be positive")
    if xi < 0:
        raise ValueError("xi must be non-negative")
    return LaserConfig(omega=units.ev(omega_ev), xi=xi)


def effective_mass(xi: float) -> float:
    """Intensity-shifted mass m_* = m sqrt(1 + xi^2)."""
    return math.sqrt(1.0 + xi**2)


@dataclass(frozen=True)
class DressedElectron:
    """Free momentum p, quasimomentum q and the shifted mass."""

    p: np.ndarray
    q: np.ndarray
    m_star: float

    @property
    def energy(self) -> float:
        return float(self.p[0])

    @property
    def quasienergy(self) -> float:
        return float(self.q[0])


def dress(p, laser: LaserConfig) -> DressedElectron:
    """Quasimomentum q = p - kappa e^2 a^2 / (4 kappa.p) and m_*.

    Requires kappa.p > 0 (electron counter-propagating or at least not
    comoving with the wave).
    """
    p = np.asarray(p, dtype=float)
    kp = float(mdot(laser.kappa, p))
    if kp <= 0:
        raise ValueError("kappa.p must be positive to dress the electron")
    q = p - laser.kappa * (laser.e2a2 / (4.0 * kp))
    return DressedElectron(p=p, q=q, m_star=laser.m_star)


def head_on_electron(energy: float, laser: LaserConfig) -> DressedElectron:
    """Electron of the given energy (units of m) moving along +x^3."""
    if energy <= 1.0:
        raise ValueError("electron energy must exceed the rest mass")
    pz = math.sqrt(energy**2 - 1.0)
    return dress(fv(energy, 0.0, 0.0, pz), laser)


def undressed(energy: float) -> DressedElectron:
    """Bare-kinematics stand-in used by the perturbative reference mode."""
    pz = math.sqrt(energy**2 - 1.0)
    p = fv(energy, 0.0, 0.0, pz)
    return DressedElectron(p=p, q=p.copy(), m_star=1.0)


@dataclass(frozen=True)
class PhotonMode:
    """Emission direction, frequency and the transverse polarization pair."""

    omega: float
    theta: float
    psi: float

    @property
    def k(self) -> np.ndarray:
        return lightlike(self.omega, self.theta, self.psi)

    @property
    def k_hat(self) -> np.ndarray:
        return unit_lightlike(self.theta, self.psi)

    @property
    def eps(self) -> tuple:
        return pol_basis(self.theta, self.psi)


def photon_mode(omega: float, theta: float, psi: float) -> PhotonMode:
    if omega <= 0:
        raise ValueError("photon frequency must be positive")
    return PhotonMode(float(omega), float(theta), float(psi))


# ---------------------------------------------------------------------------
# energy conservation
# ---------------------------------------------------------------------------


def omega_c_parts(n, electron: DressedElectron, k_b, theta_c, psi_c, laser: LaserConfig):
    """Numerator and denominator of the exact omega_c expression (vectorized).

    From (q_i + n kappa - k_b - k_c)^2 = m_*^2 with k_c = omega_c kbar_c:

        omega_c = [n kappa.q_i - k_b.q_i - n kappa.k_b]
                / [q_i.kbar_c + n kappa.kbar_c - k_b.kbar_c]
    """
    q_i = electron.q
    kap = laser.kappa
    kbar = unit_lightlike(theta_c, psi_c)
    num = n * mdot(kap, q_i) - mdot(k_b, q_i) - n * mdot(kap, k_b)
    den = mdot(q_i, kbar) + n * mdot(kap, kbar) - mdot(k_b, kbar)
    return num, den


def solve_omega_c(
    n: int,
    electron: DressedElectron,
    mode_b: PhotonMode,
    theta_c: float,
    psi_c: float,
    laser: LaserConfig,
) -> float:
    """Exact omega_c for n absorbed laser photons; raises ChannelClosed."""
    num, den = omega_c_parts(n, electron, mode_b.k, theta_c, psi_c, laser)
    if den <= 0 or num <= 0:
        raise ChannelClosed(f"n = {n}: no forward solution for omega_c")
    return float(num / den)


def omega_c_approx(
    n: int,
    electron: DressedElectron,
    omega_b: float,
    theta_b: float,
    theta_c: float,
    laser: LaserConfig,
) -> float:
    """Small-angle, ultrarelativistic approximation to omega_c.

    Valid when n omega / m << m / E_i ~ theta_{b,c} << 1; the error grows
    roughly linearly with n.
    """
    e_i = electron.energy
    d_b = theta_b**2 * e_i + (1.0 + laser.xi**2) / e_i
    d_c = theta_c**2 * e_i + (1.0 + laser.xi**2) / e_i
    return (4.0 * n * laser.omega * e_i - omega_b * d_b) / d_c


def frequency_sum_bound(n: int, electron: DressedElectron, laser: LaserConfig) -> float:
    """Upper bound omega_b + omega_c <= 4 n omega E_i^2 / (m^2 (1 + xi^2))."""
    return 4.0 * n * laser.omega * electron.energy**2 / (1.0 + laser.xi**2)


def harmonic_energy(s: int, electron: DressedElectron, theta: float, psi: float, laser: LaserConfig):
    """Energy of the s-th one-photon emission line in the direction (theta, psi)."""
    q_i = electron.q
    kbar = unit_lightlike(theta, psi)
    num = s * mdot(laser.kappa, q_i)
    den = mdot(q_i, kbar) + s * mdot(laser.kappa, kbar)
    return num / den


def chi_parameter(electron: DressedElectron, laser: LaserConfig) -> float:
    """Quantum nonlinearity parameter chi = xi kappa.p_i / m^2."""
    return laser.xi * float(mdot(laser.kappa, electron.p))


# ---------------------------------------------------------------------------
# emission points and resonance bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmissionPoint:
    """Fully determined two-photon emission configuration."""

    laser: LaserConfig
    electron: DressedElectron
    n: int
    mode_b: PhotonMode
    mode_c: PhotonMode

    @property
    def q_f(self) -> np.ndarray:
        return (
            self.electron.q
            + self.n * self.laser.kappa
            - self.mode_b.k
            - self.mode_c.k
        )

    def closure_residual(self) -> float:
        """|q_f^2 - m_*^2| relative to m_*^2.

        Limited by float cancellation at the beam energy scale: expect
        ~1e-10 for E_i ~ 1000 m, not machine epsilon.
        """
        m2 = self.electron.m_star**2
        return abs(float(msq(self.q_f)) - m2) / m2


def emission_point(
    laser: LaserConfig,
    electron: DressedElectron,
    n: int,
    omega_b: float,
    theta_b: float,
    psi_b: float,
    theta_c: float,
    psi_c: float,
) -> EmissionPoint:
    """Solve for omega_c and assemble the point (raises ChannelClosed)."""
    mode_b = photon_mode(omega_b, theta_b, psi_b)
    w_c = solve_omega_c(n, electron, mode_b, theta_c, psi_c, laser)
    return EmissionPoint(laser, electron, n, mode_b, photon_mode(w_c, theta_c, psi_c))


def propagator_denominators(ep: EmissionPoint, s: int) -> tuple:
    """(p_b^2 - m_*^2, p_c^2 - m_*^2) at the given net photon number s."""
    m2 = ep.electron.m_star**2
    q_i = ep.electron.q
    out = []
    for k in (ep.mode_b.k, ep.mode_c.k):
        p = q_i - k + s * ep.laser.kappa
        out.append(float(msq(p)) - m2)
    return tuple(out)


def resonance_distance(ep: EmissionPoint, s: int) -> float:
    """min over both channels of |p_{b,c}^2 - m_*^2|, in units of m^2.

    This is a plain distance report; whether a small value actually flags a
    point depends on the cascade window (see amplitude.AmplitudeEngine):
    only 1 <= s <= n-1 can put an intermediate state on shell with both
    sequential emissions real, while s = 0 and s = n approach zero only in
    the soft limit omega_b -> 0 handled by the infrared cut.
    """
    d_b, d_c = propagator_denominators(ep, s)
    return min(abs(d_b), abs(d_c))
