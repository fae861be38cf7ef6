"""Second-order emission amplitude in a strong plane wave.

STRUCTURE
    The two-photon S-matrix element between Volkov states is a double sum:
    over the net number n >= 1 of absorbed laser photons, and over the
    photon number s routed through the first vertex.  For each (n, s) the
    matrix element is a product

        ubar_f [ V2(n - s) (fslash + m) V1(s) / (p^2 - m_*^2) ] u_i

    summed over the two time orderings (photon b first / photon c first),
    where the dressed vertex carrying N net photons and emitting the
    polarization eps is

        V^N_{jk}(eps) = A_{0,N} epsslash
                      + A_{1,N} [ epsslash e kapslash aslash / (2 kappa.p_j)
                                + e aslash kapslash epsslash / (2 kappa.p_k) ]
                      - A_{2,N} e^2 a^2 (kappa.eps) kapslash
                                / (2 kappa.p_j kappa.p_k)

    with generalized Bessel functions A_{h,N} evaluated at the argument
    differences (alpha_j - alpha_k, beta_j - beta_k).  j labels the state
    entering the vertex, k the state leaving it.

    The intermediate quasimomentum in the channel that emits photon x
    first is p_x = q_i - k_x + s kappa; its free counterpart is
    f = p + e^2 a^2 kappa / (4 kappa.p), on the bare mass shell exactly
    when p is on the dressed shell.

CONVERGENCE AND RESONANCES
    The s window is the overlap of the decay supports of the two vertices'
    Bessel families, trimmed by the actually computed coefficient sizes;
    edge terms are checked to contribute < 1e-9 of the peak term.  A point
    is flagged resonant when some contributing s in the cascade window
    1 <= s <= n - 1 brings an intermediate state closer to the dressed
    shell than the configured threshold: there, and only there, the pole
    corresponds to two sequential real emissions.  The near-zero
    denominators at s = 0 and s = n are the infrared soft terms, bounded
    away from zero by the low-frequency cut on photon b.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import units
from .dirac import free_spinor_pair, gamma_matrices, slash, slash_tensor
from .fourvec import lightlike, mdot, pol_basis, unit_lightlike
from .genbessel import (
    fourier_tables,
    gather_orders,
    genbessel_batch,
    support_halfwidth,
    vertex_args,
)
from .kinematics import DressedElectron, EmissionPoint, LaserConfig

__all__ = [
    "AmplitudeEngine",
    "EngineSettings",
    "ResonanceError",
    "SSumConvergenceError",
    "vertex_M",
    "dressed_propagator",
    "gauge_shift",
    "reduced_amplitude",
]


class ResonanceError(ValueError):
    """An intermediate state sits within the resonance threshold."""


class SSumConvergenceError(RuntimeError):
    """The photon-exchange sum failed to converge within the s cap."""


@dataclass(frozen=True)
class EngineSettings:
    resonance_threshold: float = 1e-3  # |p^2 - m_*^2| floor, units of m_*^2
    s_max: int = 4096                  # cap on the window halfwidth
    contrib_tol: float = 1e-15         # |A| above this counts as contributing
    trim_tol: float = 1e-16            # relative weight kept in the s window
    edge_tol: float = 1e-9             # max relative edge-term contribution


@dataclass
class KinBatch:
    """Solved kinematics for a batch of (n, photon-b, direction-c) tasks."""

    n: np.ndarray
    omega_b: np.ndarray
    theta_b: np.ndarray
    psi_b: np.ndarray
    theta_c: np.ndarray
    psi_c: np.ndarray
    omega_c: np.ndarray
    open_mask: np.ndarray
    k_b: np.ndarray
    k_c: np.ndarray
    q_f: np.ndarray
    p_f: np.ndarray
    q_f_energy: np.ndarray
    qf_dot_kc: np.ndarray

    def __len__(self) -> int:
        return self.n.shape[0]


@dataclass
class AmpBatch:
    """Amplitudes and bookkeeping returned by AmplitudeEngine.amplitudes.

    amp has shape (B, Lb, Lc, 2, 2): polarization states of photon b and c,
    then the initial and final spin labels.  Closed rows are zero with
    open_mask False.
    """

    amp: np.ndarray
    open_mask: np.ndarray
    resonant: np.ndarray
    min_cascade_distance: np.ndarray
    s_terms: np.ndarray


def gauge_shift(eps, k, lam) -> np.ndarray:
    """eps -> eps + lam k, the gauge orbit of a polarization vector."""
    return np.asarray(eps, dtype=complex) + lam * np.asarray(k, dtype=complex)


def _dedup_tables(alpha: np.ndarray, beta: np.ndarray, order_max: float):
    """fourier_tables with duplicate argument pairs computed once."""
    pairs = np.stack([alpha, beta], axis=1)
    uniq, inv = np.unique(pairs, axis=0, return_inverse=True)
    tables = fourier_tables(uniq[:, 0], uniq[:, 1], order_max)
    return tables[inv]


class AmplitudeEngine:
    """Vectorized evaluator for the dressed two-photon emission amplitude.

    Parameters
    ----------
    laser, electron:
        The wave and the dressed incoming electron.  For the perturbative
        reference mode pass ``dressed=False`` together with an electron
        whose quasimomentum equals its free momentum (kinematics.undressed):
        the kinematic solve, the propagator shell and the intermediate
        fslash then use the bare mass, while the vertex structure keeps the
        (tiny) field it was given.
    """

    def __init__(
        self,
        laser: LaserConfig,
        electron: DressedElectron,
        *,
        dressed: bool = True,
        basis: str = "dirac",
        settings: EngineSettings | None = None,
        extended: bool = False,
    ):
        self.laser = laser
        self.electron = electron
        self.dressed = bool(dressed)
        self.basis = basis
        self.settings = settings or EngineSettings()
        # extended=True runs the contraction chain in 80-bit floats.  The
        # double-precision chain loses ~8 digits to cancellation between the
        # s terms and the two time orderings at beam-scale energies, which
        # is plenty for rate maps but too coarse to verify exact symmetries
        # (gauge orbits, reflections) at the 1e-8 level.  Slower; meant for
        # verification passes, not production scans.
        self.extended = bool(extended)

        gam = gamma_matrices(basis)
        self._slash_t = slash_tensor(gam)
        self._g0 = gam[0]
        self._id4 = np.eye(4, dtype=complex)
        self._kap_slash = slash(laser.kappa, self._slash_t)
        self._a_slash = slash(laser.a, self._slash_t)
        e = laser.e_charge
        self._kr = 0.5 * e * (self._kap_slash @ self._a_slash)
        self._kl = 0.5 * e * (self._a_slash @ self._kap_slash)

        self.u_i = free_spinor_pair(electron.p, basis=basis)
        self._q_i = electron.q
        self._m_star2 = electron.m_star**2
        self._q_i_energy = electron.quasienergy
        self._kap_qi = float(mdot(laser.kappa, electron.q))
        self._a_qi = float(mdot(laser.a, electron.q))
        self._alpha_i, self._beta_i = (float(x) for x in vertex_args(electron.p, laser))

    # -- kinematics ---------------------------------------------------------

    def solve(self, n, omega_b, theta_b, psi_b, theta_c, psi_c) -> KinBatch:
        """Solve omega_c and the final momenta for a task batch."""
        n, omega_b, theta_b, psi_b, theta_c, psi_c = np.broadcast_arrays(
            *(np.atleast_1d(np.asarray(x, dtype=float)) for x in
              (n, omega_b, theta_b, psi_b, theta_c, psi_c))
        )
        lz = self.laser
        kap = lz.kappa
        q_i = self._q_i
        k_b = lightlike(omega_b, theta_b, psi_b)
        kbar = unit_lightlike(theta_c, psi_c)
        num = n * self._kap_qi - mdot(k_b, q_i) - n * mdot(kap, k_b)
        den = mdot(q_i, kbar) + n * mdot(kap, kbar) - mdot(k_b, kbar)
        open_mask = (omega_b > 0) & (num > 0) & (den > 0)
        omega_c = np.where(open_mask, num / np.where(den != 0, den, 1.0), np.nan)
        k_c = np.where(open_mask[..., None], omega_c[..., None] * kbar, 0.0)
        q_f = q_i + n[..., None] * kap - k_b - k_c
        kap_qf = self._kap_qi - mdot(kap, k_b) - mdot(kap, k_c)
        q_f_energy = q_f[..., 0]
        qf_dot_kc = mdot(q_f, k_c)
        open_mask = open_mask & (q_f_energy > 0) & (qf_dot_kc > 0) & (kap_qf > 0)
        if self.dressed:
            safe = np.where(kap_qf != 0, kap_qf, 1.0)
            p_f = q_f + (lz.e2a2 / (4.0 * safe))[..., None] * kap
        else:
            p_f = q_f
        return KinBatch(
            n=n.astype(int), omega_b=omega_b, theta_b=theta_b, psi_b=psi_b,
            theta_c=theta_c, psi_c=psi_c, omega_c=omega_c, open_mask=open_mask,
            k_b=k_b, k_c=k_c, q_f=q_f, p_f=p_f, q_f_energy=q_f_energy,
            qf_dot_kc=qf_dot_kc,
        )

    def kin_explicit(self, n, omega_b, theta_b, psi_b, omega_c, theta_c, psi_c,
                     closure_tol: float = 1e-8) -> KinBatch:
        """Batch with omega_c supplied (for symmetry and gauge tests).

        The caller guarantees energy-momentum closure; it is re-checked to
        closure_tol relative to m_*^2.
        """
        kin = self.solve(n, omega_b, theta_b, psi_b, theta_c, psi_c)
        omega_c = np.broadcast_to(np.atleast_1d(np.asarray(omega_c, float)), kin.omega_c.shape)
        worst = np.nanmax(np.abs(np.where(kin.open_mask, kin.omega_c - omega_c, 0.0)))
        if worst > closure_tol * max(1.0, float(np.nanmax(omega_c))):
            raise ValueError(f"supplied omega_c violates closure by {worst:.3e}")
        return kin

    # -- vertex building blocks --------------------------------------------

    def _pieces(self, eps: np.ndarray, inv_kpj, inv_kpk) -> np.ndarray:
        """The three h-components of the vertex for each polarization.

        eps: (B, L, 4) complex.  Returns (B, L, 3, 4, 4) ordered so that
        contracting with (A_0, A_1, A_2) reproduces V^N_{jk}(eps).
        """
        inv_j = np.asarray(inv_kpj, dtype=float).reshape(-1, 1, 1, 1)
        inv_k = np.asarray(inv_kpk, dtype=float).reshape(-1, 1, 1, 1)
        e_sl = slash(eps, self._slash_t)
        g_term = (e_sl @ self._kr) * inv_j + (self._kl @ e_sl) * inv_k
        kap_eps = mdot(self.laser.kappa[None, None, :], eps)
        h_coef = 0.5 * self.laser.e2a2 * kap_eps * inv_j[..., 0, 0] * inv_k[..., 0, 0]
        h_term = -h_coef[..., None, None] * self._kap_slash
        return np.stack([e_sl, g_term, h_term], axis=2)

    def _channel(self, *, n, eps_first, eps_second, kap_mid, qi_kfirst,
                 dab1, dbb1, dab2, dbb2, inv_kpf, c_mat, ubar_f):
        """One time ordering: emit `first` photon, propagate, emit `second`.

        Returns amp (B, L_first, L_second, 2, 2) indexed
        [lambda_first, lambda_second, r_i, r_f], plus resonance flags, the
        minimum cascade distance (units of m^2), and the term count.
        """
        st = self.settings
        b_sz = n.shape[0]
        # kappa.(q_i - k_first) equals kappa.p_mid for every s (kappa^2 = 0)
        kap_dq = kap_mid

        # decay-bound window, then trim by the actual coefficient sizes
        w1 = np.minimum(support_halfwidth(dab1, dbb1), st.s_max)
        w2 = np.minimum(support_halfwidth(dab2, dbb2), st.s_max)
        s_lo = np.ceil(np.maximum(-w1, n - w2)).astype(int)
        s_hi = np.floor(np.minimum(w1, n + w2)).astype(int)
        empty = s_lo > s_hi
        s_lo = np.where(empty, 0, s_lo)
        s_hi = np.where(empty, 0, s_hi)
        width = int(np.max(s_hi - s_lo + 1))
        order_cap = float(max(np.max(np.abs(s_lo)), np.max(np.abs(s_hi)),
                              np.max(np.abs(n - s_lo)), np.max(np.abs(n - s_hi))))
        t1 = _dedup_tables(dab1, dbb1, order_cap)
        t2 = _dedup_tables(dab2, dbb2, order_cap)

        s_grid = s_lo[:, None] + np.arange(width)[None, :]
        valid = (s_grid <= s_hi[:, None]) & ~empty[:, None]
        a1 = gather_orders(t1, s_grid)
        a2 = gather_orders(t2, n[:, None] - s_grid)
        weight = np.abs(a1).max(axis=-1) * np.abs(a2).max(axis=-1)
        weight = np.where(valid, weight, 0.0)
        peak = weight.max(axis=1, keepdims=True)
        keep = weight > st.trim_tol * np.where(peak > 0, peak, 1.0)
        any_kept = keep.any(axis=1)
        first = np.where(any_kept, keep.argmax(axis=1), 0)
        last = np.where(any_kept, width - 1 - keep[:, ::-1].argmax(axis=1), 0)
        s_lo2 = s_lo + first
        s_hi2 = s_lo + last
        width2 = int(np.max(s_hi2 - s_lo2 + 1))
        s_grid = s_lo2[:, None] + np.arange(width2)[None, :]
        valid = (s_grid <= s_hi2[:, None]) & any_kept[:, None] & ~empty[:, None]
        a1 = np.where(valid[..., None], gather_orders(t1, s_grid), 0.0)
        a2 = np.where(valid[..., None], gather_orders(t2, n[:, None] - s_grid), 0.0)

        den = 2.0 * (s_grid * kap_dq[:, None] - qi_kfirst[:, None])
        contributing = valid & (np.abs(a1).max(-1) > st.contrib_tol) \
            & (np.abs(a2).max(-1) > st.contrib_tol)
        cascade = contributing & (s_grid >= 1) & (s_grid <= (n - 1)[:, None])
        dist = np.where(cascade, np.abs(den), np.inf)
        min_dist = dist.min(axis=1)
        resonant = min_dist < self.settings.resonance_threshold * self._m_star2
        den_safe = np.where(np.abs(den) > 1e-280, den, 1e-280)

        inv_kpmid = 1.0 / kap_mid
        pieces1 = self._pieces(eps_first, np.full(b_sz, 1.0 / self._kap_qi), inv_kpmid)
        pieces2 = self._pieces(eps_second, inv_kpmid, inv_kpf)

        u_i = self.u_i
        kap_slash = self._kap_slash
        if self.extended:
            a1 = a1.astype(np.longdouble)
            a2 = a2.astype(np.longdouble)
            den_safe = den_safe.astype(np.longdouble)
            pieces1 = pieces1.astype(np.clongdouble)
            pieces2 = pieces2.astype(np.clongdouble)
            c_mat = c_mat.astype(np.clongdouble)
            ubar_f = ubar_f.astype(np.clongdouble)
            u_i = u_i.astype(np.clongdouble)
            kap_slash = kap_slash.astype(np.clongdouble)

        r1 = np.einsum("blhij,rj->blhri", pieces1, u_i)
        cr1 = np.einsum("bij,blhrj->blhri", c_mat, r1)
        kr1 = np.einsum("ij,blhrj->blhri", kap_slash, r1)
        y = np.einsum("bsh,blhri->bslri", a1, cr1) \
            + np.einsum("bsh,bs,blhri->bslri", a1, s_grid.astype(float), kr1)
        y /= den_safe[:, :, None, None, None]
        lbar = np.einsum("bfi,blhij->blhfj", ubar_f, pieces2)
        lmat = np.einsum("bsh,blhfj->bslfj", a2, lbar)
        z = np.einsum("bslfj,bsmrj->bsmlrf", lmat, y)

        # edge diagnostic: outermost valid terms must be negligible
        t_mag = np.abs(z).max(axis=(2, 3, 4, 5))
        t_peak = t_mag.max(axis=1)
        n_valid = valid.sum(axis=1)
        idx = np.arange(width2)[None, :]
        is_edge = valid & ((idx < 2) | (idx >= (n_valid - 2)[:, None]))
        edge_mag = np.where(is_edge, t_mag, 0.0).max(axis=1)
        busy = (t_peak > 0) & (n_valid > 8)
        bad = busy & (edge_mag > self.settings.edge_tol * t_peak)
        if np.any(bad):
            worst = int(np.argmax(np.where(bad, edge_mag / np.where(t_peak > 0, t_peak, 1), 0)))
            raise SSumConvergenceError(
                "photon-exchange sum not converged at window edge "
                f"(row {worst}, edge/peak = {edge_mag[worst] / t_peak[worst]:.2e}); "
                "raise s_max or loosen cuts"
            )
        amp = z.sum(axis=1)
        return amp, resonant, min_dist, valid.sum(axis=1)

    # -- public evaluation ---------------------------------------------------

    def amplitudes(self, kin: KinBatch, eps_b=None, eps_c=None) -> AmpBatch:
        """Evaluate the batch.  eps_b/eps_c default to the transverse basis
        pair of each photon; explicit (possibly complex, possibly
        gauge-shifted) vectors may be supplied with shape (B, L, 4)."""
        b_all = len(kin)
        sel = np.nonzero(kin.open_mask)[0]

        def norm_eps(eps):
            arr = np.asarray(eps, dtype=complex)
            if arr.ndim == 1:
                arr = arr[None, :]
            if arr.ndim == 2:
                arr = np.broadcast_to(arr, (b_all,) + arr.shape)
            if arr.shape[0] != b_all or arr.shape[-1] != 4:
                raise ValueError("polarization array must broadcast to (B, L, 4)")
            return arr

        l_b = 2 if eps_b is None else norm_eps(eps_b).shape[1]
        l_c = 2 if eps_c is None else norm_eps(eps_c).shape[1]
        amp_full = np.zeros((b_all, l_b, l_c, 2, 2), dtype=complex)
        resonant = np.zeros(b_all, dtype=bool)
        min_dist = np.full(b_all, np.inf)
        s_terms = np.zeros(b_all, dtype=int)
        if sel.size == 0:
            return AmpBatch(amp_full, kin.open_mask.copy(), resonant, min_dist, s_terms)

        n = kin.n[sel]
        k_b = kin.k_b[sel]
        k_c = kin.k_c[sel]
        p_f = kin.p_f[sel]
        omega_b = kin.omega_b[sel]
        omega_c = kin.omega_c[sel]
        q_f_energy = kin.q_f_energy[sel]
        lz = self.laser

        if eps_b is None:
            e1, e2 = pol_basis(kin.theta_b[sel], kin.psi_b[sel])
            eps_b_arr = np.stack([e1, e2], axis=1).astype(complex)
        else:
            eps_b_arr = norm_eps(eps_b)[sel]
        if eps_c is None:
            e1, e2 = pol_basis(kin.theta_c[sel], kin.psi_c[sel])
            eps_c_arr = np.stack([e1, e2], axis=1).astype(complex)
        else:
            eps_c_arr = norm_eps(eps_c)[sel]

        kap = lz.kappa
        a_vec = lz.a
        kap_kb = mdot(kap, k_b)
        kap_kc = mdot(kap, k_c)
        a_kb = mdot(a_vec, k_b)
        a_kc = mdot(a_vec, k_c)
        kap_pb = self._kap_qi - kap_kb
        kap_pc = self._kap_qi - kap_kc
        kap_pf = self._kap_qi - kap_kb - kap_kc
        a_pb = self._a_qi - a_kb
        a_pc = self._a_qi - a_kc
        a_pf = self._a_qi - a_kb - a_kc
        e = lz.e_charge
        alpha_b = e * a_pb / kap_pb
        alpha_c = e * a_pc / kap_pc
        alpha_f = e * a_pf / kap_pf
        beta_b = lz.e2a2 / (8.0 * kap_pb)
        beta_c = lz.e2a2 / (8.0 * kap_pc)
        beta_f = lz.e2a2 / (8.0 * kap_pf)

        u_f = free_spinor_pair(p_f, basis=self.basis)
        ubar_f = np.einsum("bri,ij->brj", np.conjugate(u_f), self._g0)

        corr_b = (lz.e2a2 / (4.0 * kap_pb)) if self.dressed else np.zeros_like(kap_pb)
        corr_c = (lz.e2a2 / (4.0 * kap_pc)) if self.dressed else np.zeros_like(kap_pc)
        c_b = slash(self._q_i - k_b, self._slash_t) + self._id4 \
            + corr_b[:, None, None] * self._kap_slash
        c_c = slash(self._q_i - k_c, self._slash_t) + self._id4 \
            + corr_c[:, None, None] * self._kap_slash

        amp_b, res_b, dist_b, terms_b = self._channel(
            n=n, eps_first=eps_b_arr, eps_second=eps_c_arr, kap_mid=kap_pb,
            qi_kfirst=mdot(self._q_i, k_b),
            dab1=self._alpha_i - alpha_b, dbb1=self._beta_i - beta_b,
            dab2=alpha_b - alpha_f, dbb2=beta_b - beta_f,
            inv_kpf=1.0 / kap_pf, c_mat=c_b, ubar_f=ubar_f,
        )
        amp_c, res_c, dist_c, terms_c = self._channel(
            n=n, eps_first=eps_c_arr, eps_second=eps_b_arr, kap_mid=kap_pc,
            qi_kfirst=mdot(self._q_i, k_c),
            dab1=self._alpha_i - alpha_c, dbb1=self._beta_i - beta_c,
            dab2=alpha_c - alpha_f, dbb2=beta_c - beta_f,
            inv_kpf=1.0 / kap_pf, c_mat=c_c, ubar_f=ubar_f,
        )
        # amp_c is indexed [lambda_c, lambda_b, ...]; put photon b first
        amp = amp_b + np.swapaxes(amp_c, 1, 2)
        pref = units.E_CHARGE**2 / np.sqrt(
            omega_b * omega_c * self._q_i_energy * q_f_energy
        )
        amp *= pref[:, None, None, None, None]

        amp_full[sel] = amp
        resonant[sel] = res_b | res_c
        min_dist[sel] = np.minimum(dist_b, dist_c)
        s_terms[sel] = terms_b + terms_c
        return AmpBatch(amp_full, kin.open_mask.copy(), resonant, min_dist, s_terms)

    # -- one-photon (single vertex) companion --------------------------------

    def single_photon(self, n, theta, psi):
        """Amplitude ubar_f V^n_{if}(eps_lambda) u_i for one-photon emission.

        Returns (amp (B, 2, 2, 2) [lambda, r_i, r_f], omega (B,), q_f_energy,
        qf_dot_k).  Always open for n >= 1 in this geometry.
        """
        n_arr, theta, psi = np.broadcast_arrays(
            *(np.atleast_1d(np.asarray(x, dtype=float)) for x in (n, theta, psi))
        )
        lz = self.laser
        kap = lz.kappa
        kbar = unit_lightlike(theta, psi)
        num = n_arr * self._kap_qi
        den = mdot(self._q_i, kbar) + n_arr * mdot(kap, kbar)
        omega = num / den
        k = omega[..., None] * kbar
        q_f = self._q_i + n_arr[..., None] * kap - k
        kap_qf = self._kap_qi - mdot(kap, k)
        if self.dressed:
            p_f = q_f + (lz.e2a2 / (4.0 * kap_qf))[..., None] * kap
        else:
            p_f = q_f
        u_f = free_spinor_pair(p_f, basis=self.basis)
        ubar_f = np.einsum("bri,ij->brj", np.conjugate(u_f), self._g0)

        a_k = mdot(lz.a, k)
        kap_pf = kap_qf
        a_pf = self._a_qi - a_k
        e = lz.e_charge
        alpha_f = e * a_pf / kap_pf
        beta_f = lz.e2a2 / (8.0 * kap_pf)
        dab = self._alpha_i - alpha_f
        dbb = self._beta_i - beta_f

        e1, e2 = pol_basis(theta, psi)
        eps = np.stack([e1, e2], axis=1).astype(complex)
        pieces = self._pieces(eps, np.full(n_arr.shape, 1.0 / self._kap_qi), 1.0 / kap_pf)

        tables = _dedup_tables(dab, dbb, float(np.max(np.abs(n_arr))))
        avals = gather_orders(tables, n_arr.astype(int)[:, None])[:, 0, :]
        vertex = np.einsum("bh,blhij->blij", avals, pieces)
        amp = np.einsum("bfi,blij,rj->blrf", ubar_f, vertex, self.u_i)
        return amp, omega, q_f[..., 0], mdot(q_f, k)


# ---------------------------------------------------------------------------
# scalar conveniences (tests and exploratory use)
# ---------------------------------------------------------------------------


def vertex_M(n_order: int, p_j, p_k, eps, laser: LaserConfig) -> np.ndarray:
    """The 4x4 dressed vertex V^N_{jk}(eps) at a single order."""
    aj, bj = vertex_args(p_j, laser)
    ak, bk = vertex_args(p_k, laser)
    da, db = float(aj - ak), float(bj - bk)
    batch = genbessel_batch(da, db, n_order, n_order)
    a0, a1, a2 = (batch.a(h, n_order) for h in range(3))
    kap_sl = slash(laser.kappa)
    a_sl = slash(laser.a)
    e = laser.e_charge
    e_sl = slash(np.asarray(eps, dtype=complex))
    kpj = float(mdot(laser.kappa, p_j))
    kpk = float(mdot(laser.kappa, p_k))
    g_term = e_sl @ (0.5 * e * kap_sl @ a_sl) / kpj + (0.5 * e * a_sl @ kap_sl) @ e_sl / kpk
    kap_eps = complex(mdot(laser.kappa, np.asarray(eps, dtype=complex)))
    h_term = laser.e2a2 * kap_eps * kap_sl / (2.0 * kpj * kpk)
    return a0 * e_sl + a1 * g_term - a2 * h_term


def dressed_propagator(p, laser: LaserConfig, *, m_star2: float | None = None,
                       threshold: float = 1e-3):
    """Numerator fslash + m and denominator p^2 - m_*^2 of the dressed line.

    Raises ResonanceError when |denominator| < threshold * m_*^2.
    """
    from .fourvec import msq

    p = np.asarray(p, dtype=float)
    m2 = laser.m_star**2 if m_star2 is None else m_star2
    denom = float(msq(p)) - m2
    if abs(denom) < threshold * m2:
        raise ResonanceError(f"intermediate state within {threshold} of the shell")
    kp = float(mdot(laser.kappa, p))
    f = p + (laser.e2a2 / (4.0 * kp)) * laser.kappa
    numer = slash(f) + np.eye(4, dtype=complex)
    return numer, denom


def reduced_amplitude(ep: EmissionPoint, r_i: int, r_f: int,
                      pol_b: int = 0, pol_c: int = 0,
                      *, dressed: bool = True,
                      settings: EngineSettings | None = None) -> complex:
    """Single-point amplitude for basis polarizations (pol indexes 0/1)."""
    eng = AmplitudeEngine(ep.laser, ep.electron, dressed=dressed, settings=settings)
    kin = eng.kin_explicit(
        ep.n, ep.mode_b.omega, ep.mode_b.theta, ep.mode_b.psi,
        ep.mode_c.omega, ep.mode_c.theta, ep.mode_c.psi,
    )
    out = eng.amplitudes(kin)
    return complex(out.amp[0, pol_b, pol_c, r_i, r_f])
