"""Gamma-matrix algebra and free Dirac spinors.

PHYSICS SCOPE
    4x4 gamma matrices in the standard (Dirac) representation, with a Weyl
    (chiral) set available for cross-checks.  Free positive-energy spinors
    u_r(p) for on-shell momenta, normalized to

        ubar u = u^dagger gamma^0 u = 1,

    which implies u^dagger u = E/m and the completeness relation
    sum_r u_r ubar_r = (pslash + m) / (2 m).

CONVENTIONS
    * metric (+,-,-,-); pslash = p^mu gamma_mu = p0 g0 - p1 g1 - p2 g2 - p3 g3
    * spin labels r in {0, 1} are eigenstates of the rest-frame spin operator
      along a chosen axis (default x^3)
    * everything is plain numpy, complex128 throughout
"""

from __future__ import annotations

import numpy as np

_I2 = np.eye(2, dtype=complex)
SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def _block(a, b, c, d):
    return np.block([[a, b], [c, d]])


def gamma_matrices(basis: str = "dirac") -> np.ndarray:
    """Return the four gamma matrices stacked as an array of shape (4, 4, 4).

    basis "dirac": gamma^0 = diag(1, 1, -1, -1), gamma^i off-diagonal in the
    Pauli matrices.  basis "weyl": chiral representation, used only to verify
    representation independence of physical results.
    """
    z = np.zeros((2, 2), dtype=complex)
    if basis == "dirac":
        g0 = _block(_I2, z, z, -_I2)
        gi = [_block(z, SIGMA[k], -SIGMA[k], z) for k in range(3)]
    elif basis == "weyl":
        g0 = _block(z, _I2, _I2, z)
        gi = [_block(z, SIGMA[k], -SIGMA[k], z) for k in range(3)]
    else:
        raise ValueError(f"unknown basis {basis!r}")
    return np.stack([g0, *gi])


GAMMA = gamma_matrices("dirac")
GAMMA0 = GAMMA[0]

# gamma_mu with the index lowered, so pslash = p^mu SLASH_TENSOR[mu].
_METRIC = np.array([1.0, -1.0, -1.0, -1.0])


def slash_tensor(gammas: np.ndarray) -> np.ndarray:
    return gammas * _METRIC[:, None, None]


SLASH = slash_tensor(GAMMA)


def slash(p, slash_t: np.ndarray = SLASH) -> np.ndarray:
    """pslash for a four-vector (or batch of four-vectors)."""
    return np.einsum("...m,mij->...ij", np.asarray(p, dtype=complex), slash_t)


def dirac_adjoint(m: np.ndarray, gamma0: np.ndarray = GAMMA0) -> np.ndarray:
    """gamma^0 M^dagger gamma^0, the bar-conjugate of an operator."""
    return gamma0 @ np.conjugate(np.swapaxes(m, -1, -2)) @ gamma0


def _rest_spinors(basis: str, axis: str) -> np.ndarray:
    """Positive-energy rest-frame spinors, shape (2, 4), rows ubar u = 1."""
    if axis == "z":
        chi = np.array([[1, 0], [0, 1]], dtype=complex)
    elif axis == "x":
        chi = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    else:
        raise ValueError(f"unsupported spin axis {axis!r}")
    if basis == "dirac":
        upper, lower = chi, np.zeros_like(chi)
    elif basis == "weyl":
        upper = lower = chi / np.sqrt(2)
    else:
        raise ValueError(f"unknown basis {basis!r}")
    return np.concatenate([upper, lower], axis=1)


def free_spinor_pair(
    p,
    mass: float = 1.0,
    basis: str = "dirac",
    axis: str = "z",
    tol: float = 1e-8,
) -> np.ndarray:
    """Both spin states u_r(p), returned with shape (..., 2, 4).

    p must be on the positive-energy mass shell; the mass-shell residual is
    checked to `tol` relative to E^2.  Construction is basis generic:
    u_r(p) = (pslash + m) u_r(0) / sqrt(2 m (E + m)).
    """
    p = np.asarray(p, dtype=float)
    e = p[..., 0]
    from .fourvec import msq

    residual = np.abs(msq(p) - mass**2)
    if np.any(residual > tol * np.maximum(e**2, mass**2)) or np.any(e <= 0):
        worst = float(np.max(residual))
        raise ValueError(f"momentum off the mass shell (residual {worst:.3e})")
    gammas = gamma_matrices(basis)
    rest = _rest_spinors(basis, axis)
    ps = slash(p, slash_tensor(gammas))
    proj = ps + mass * np.eye(4)
    u = np.einsum("...ij,rj->...ri", proj, rest)
    norm = np.sqrt(2.0 * mass * (e + mass))
    return u / norm[..., None, None]


def free_spinor(p, r: int, **kw) -> np.ndarray:
    return free_spinor_pair(p, **kw)[..., r, :]


def bilinear(u_out, m: np.ndarray, u_in, gamma0: np.ndarray = GAMMA0):
    """u_out^dagger gamma^0 M u_in, broadcasting over leading axes."""
    left = np.einsum("...i,ij->...j", np.conjugate(u_out), gamma0)
    return np.einsum("...j,...jk,...k->...", left, m, u_in)
