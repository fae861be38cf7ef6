"""Minkowski four-vector helpers.

CONVENTIONS
    * metric signature (+, -, -, -)
    * a four-vector is a numpy array whose last axis has length 4 and holds
      (t, x, y, z); all helpers broadcast over leading axes
    * components may be complex (used for polarization superpositions and
      gauge-shifted polarization vectors)

The laser propagates along -x^3 and the electron along +x^3; photon
directions are parametrized by the polar angle theta measured from +x^3 and
the azimuth psi measured from +x^1.
"""

from __future__ import annotations

import numpy as np

METRIC_DIAG = np.array([1.0, -1.0, -1.0, -1.0])


def fv(t, x, y, z) -> np.ndarray:
    """Stack components into a (…, 4) four-vector array."""
    return np.stack(np.broadcast_arrays(t, x, y, z), axis=-1)


def mdot(p, q):
    """Minkowski scalar product p.q with signature (+,-,-,-)."""
    p = np.asarray(p)
    q = np.asarray(q)
    return (
        p[..., 0] * q[..., 0]
        - p[..., 1] * q[..., 1]
        - p[..., 2] * q[..., 2]
        - p[..., 3] * q[..., 3]
    )


def msq(p):
    """Invariant square p.p."""
    return mdot(p, p)


def three_norm(p):
    """Euclidean norm of the spatial part."""
    p = np.asarray(p)
    return np.sqrt(np.abs(p[..., 1]) ** 2 + np.abs(p[..., 2]) ** 2 + np.abs(p[..., 3]) ** 2)


def lightlike(omega, theta, psi) -> np.ndarray:
    """Photon four-momentum omega * (1, sin th cos psi, sin th sin psi, cos th)."""
    omega = np.asarray(omega, dtype=float)
    st, ct = np.sin(theta), np.cos(theta)
    return fv(omega, omega * st * np.cos(psi), omega * st * np.sin(psi), omega * ct)


def unit_lightlike(theta, psi) -> np.ndarray:
    """Direction factor k/omega for a photon at (theta, psi)."""
    return lightlike(np.ones_like(np.asarray(theta, dtype=float)), theta, psi)


def pol_basis(theta, psi) -> tuple[np.ndarray, np.ndarray]:
    """Transverse linear polarization pair for a photon at (theta, psi).

    eps1 lies in the plane spanned by the propagation direction and x^1 for
    psi = 0; eps2 is orthogonal to it.  Both are spacelike unit vectors
    (eps.eps = -1) orthogonal to the photon momentum.
    """
    theta = np.asarray(theta, dtype=float)
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(psi), np.cos(psi)
    zero = np.zeros(np.broadcast_shapes(st.shape, np.shape(cp)))
    eps1 = fv(zero, ct * cp, ct * sp, -st)
    eps2 = fv(zero, -sp + zero, cp + zero, zero)
    return eps1, eps2


def timelike_energy(p):
    """Time component, i.e. the energy."""
    return np.asarray(p)[..., 0]
