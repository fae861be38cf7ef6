"""Two-photon polarization density matrix and Wootters concurrence.

At a fixed differential point the pair's polarization state is read off
the amplitudes S(lambda_b, lambda_c).  Spins are traced out (the electron
is not observed): rho_tilde = (1/2) sum_{r_i, r_f} S S^dagger in the
4-dimensional |lambda_b lambda_c> space.  When several photon numbers n
are open at the same point they feed distinguishable final states
(different omega_c and electron recoil), so their matrices combine as an
incoherent sum weighted by each n's phase-space factor, and the result is
normalized to unit trace.

The concurrence uses the spin-flipped overlap: with Y = sigma_y (x)
sigma_y and zeta_j the descending eigenvalues of rho Y rho* Y,

    C = max(0, sqrt(zeta_1) - sqrt(zeta_2) - sqrt(zeta_3) - sqrt(zeta_4)).

Numerically the zeta are obtained as squared singular values of
sqrt(rho) Y sqrt(rho)^T, which keeps them real and nonnegative even at
degeneracies; sqrt(rho) is the Hermitian square root via eigh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .amplitude import AmplitudeEngine
from .rates import polarization_components

__all__ = [
    "PolarizationDensityMatrix",
    "ConcurrenceResult",
    "NoOpenChannelError",
    "density_matrix",
    "density_matrix_per_n",
    "concurrence",
    "concurrence_map",
]

_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_YY = np.kron(_SY, _SY)

_HERM_TOL = 1e-12
_PSD_TOL = 1e-10


class NoOpenChannelError(ValueError):
    """No open, non-resonant channel contributes at the requested point."""


@dataclass
class PolarizationDensityMatrix:
    """4x4 state in the product basis |lambda_b lambda_c> = |11>,|12>,|21>,|22>."""

    rho: np.ndarray
    weight: float  # phase-space weight absorbed by normalization (rate units)

    def validate(self, herm_tol: float = _HERM_TOL, psd_tol: float = _PSD_TOL):
        r = self.rho
        if r.shape != (4, 4):
            raise ValueError("density matrix must be 4x4")
        if np.abs(r - r.conj().T).max() > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(r).real - 1.0) > 1e-10:
            raise ValueError("density matrix trace differs from one")
        if np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min() < -psd_tol:
            raise ValueError("density matrix has a negative eigenvalue")
        return self


@dataclass
class ConcurrenceResult:
    value: float
    zetas: np.ndarray  # descending, real


def _rho_from_amp(amp: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, float]:
    """Unnormalized rho and its trace from per-n amplitudes.

    amp: (N, 2, 2, 2, 2) indexed [n, lambda_b, lambda_c, r_i, r_f];
    weights: (N,) phase-space factors (zero for closed/excluded n).
    """
    s = amp.reshape(amp.shape[0], 4, 4)  # (N, pol-pair, spin-pair)
    rho_n = 0.5 * np.einsum("nir,njr->nij", s, s.conj())
    rho = np.einsum("n,nij->ij", weights, rho_n)
    tr = float(np.trace(rho).real)
    return rho, tr


def density_matrix(
    engine: AmplitudeEngine,
    n_values,
    omega_b, theta_b, psi_b, theta_c, psi_c,
) -> PolarizationDensityMatrix:
    """Normalized polarization state at one differential point."""
    amp, weight, _, _ = polarization_components(
        engine, np.asarray(n_values, dtype=int),
        omega_b, theta_b, psi_b, theta_c, psi_c,
    )
    rho, tr = _rho_from_amp(amp[0], weight[0])
    if tr <= 0.0:
        raise NoOpenChannelError("no open non-resonant channel at this point")
    out = PolarizationDensityMatrix(rho=rho / tr, weight=tr)
    # enforce exact Hermiticity against roundoff before validation
    out.rho = 0.5 * (out.rho + out.rho.conj().T)
    return out.validate()


def density_matrix_per_n(
    engine: AmplitudeEngine,
    n_values,
    omega_b, theta_b, psi_b, theta_c, psi_c,
) -> list[PolarizationDensityMatrix | None]:
    """Each n's own normalized matrix (None where closed or excluded)."""
    amp, weight, _, _ = polarization_components(
        engine, np.asarray(n_values, dtype=int),
        omega_b, theta_b, psi_b, theta_c, psi_c,
    )
    out = []
    for j in range(amp.shape[1]):
        if weight[0, j] <= 0.0:
            out.append(None)
            continue
        rho, tr = _rho_from_amp(amp[0, j:j + 1], weight[0, j:j + 1])
        if tr <= 0.0:
            out.append(None)
            continue
        rho = rho / tr
        rho = 0.5 * (rho + rho.conj().T)
        out.append(PolarizationDensityMatrix(rho=rho, weight=tr).validate())
    return out


def concurrence(rho_or_dm) -> ConcurrenceResult:
    """Wootters concurrence of a two-qubit state."""
    if isinstance(rho_or_dm, PolarizationDensityMatrix):
        dm = rho_or_dm
    else:
        rho = np.asarray(rho_or_dm, dtype=complex)
        tr = float(np.trace(rho).real)
        if tr <= 0:
            raise ValueError("state has nonpositive trace")
        dm = PolarizationDensityMatrix(rho=rho / tr, weight=tr)
    dm.validate()
    rho = dm.rho

    evals, evecs = np.linalg.eigh(rho)
    evals = np.clip(evals, 0.0, None)
    sqrt_rho = (evecs * np.sqrt(evals)) @ evecs.conj().T
    sing = np.linalg.svd(sqrt_rho @ _YY @ sqrt_rho.T, compute_uv=False)
    zetas = np.sort(sing**2)[::-1]
    if zetas.min() < -_PSD_TOL:
        raise ValueError("spin-flip eigenvalues came out negative")
    roots = np.sqrt(np.clip(zetas, 0.0, None))
    c = float(max(0.0, roots[0] - roots[1] - roots[2] - roots[3]))
    return ConcurrenceResult(value=min(c, 1.0), zetas=zetas)


def concurrence_map(
    engine: AmplitudeEngine,
    n_values,
    omega_b, theta_b, psi_b, theta_c, psi_c,
):
    """Concurrence plus the polarization-summed rate over broadcast grids.

    All six coordinate arguments broadcast together; returns dict with
    'concurrence', 'rate' (natural-unit density), and 'mask' (True where
    the point produced no usable state: closed or fully excluded).  Grid
    cells fail independently, never the whole map.
    """
    pts = [np.atleast_1d(np.asarray(x, dtype=float))
           for x in (omega_b, theta_b, psi_b, theta_c, psi_c)]
    pts = np.broadcast_arrays(*pts)
    shape = pts[0].shape
    flat = [p.reshape(-1) for p in pts]
    amp, weight, _, _ = polarization_components(
        engine, np.asarray(n_values, dtype=int), *flat,
    )
    p_sz = amp.shape[0]
    conc = np.zeros(p_sz)
    rate = np.zeros(p_sz)
    mask = np.zeros(p_sz, dtype=bool)
    for i in range(p_sz):
        rho, tr = _rho_from_amp(amp[i], weight[i])
        if tr <= 0.0:
            mask[i] = True
            continue
        rate[i] = tr
        rho = rho / tr
        rho = 0.5 * (rho + rho.conj().T)
        try:
            conc[i] = concurrence(PolarizationDensityMatrix(rho, tr)).value
        except ValueError:
            mask[i] = True
    return {
        "concurrence": conc.reshape(shape),
        "rate": rate.reshape(shape),
        "mask": mask.reshape(shape),
    }
