"""Generalized Bessel functions for laser-dressed vertices.

The dressed vertex of a linearly polarized plane wave needs the three
families

    A_{h,N}(alpha, beta) = int_0^{2pi} dtheta/(2pi) cos^h(theta)
                           * exp(i N theta - i alpha sin theta
                                 + i beta sin 2theta),      h = 0, 1, 2,

with real arguments built from differences of the per-momentum phases

    alpha_j = e (a.p_j) / (kappa.p_j),   beta_j = e^2 a^2 / (8 kappa.p_j).

NUMERICS
    The integrand is entire and 2pi-periodic, so the uniform trapezoidal
    rule converges spectrally: one FFT of M samples returns every order N
    at once with aliasing error bounded by the magnitude of orders beyond
    M - |N|.  M is chosen as a power of two with

        M >= 4 (|N|_max + |alpha| + 2 |beta|) + 64,

    which keeps the aliased tail below 1e-15 because |A_{0,N}| <= 1e-15
    once |N| > |alpha| + 2 |beta| + 40.

    h = 1, 2 follow from h = 0 by the cosine shift identities

        A_{1,N} = (A_{0,N-1} + A_{0,N+1}) / 2
        A_{2,N} = (A_{0,N-2} + 2 A_{0,N} + A_{0,N+2}) / 4

    so only one FFT per argument pair is ever computed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fourvec import mdot

DECAY_MARGIN = 40  # |A_0N| <~ 1e-8 at |alpha| + 2|beta| + this, 1e-15 ~25 further
_REALITY_TOL = 1e-10


class DegenerateKinematicsError(ValueError):
    """kappa.p vanished: the Volkov phase arguments are undefined."""


def vertex_args(p, laser) -> tuple:
    """Phase arguments (alpha_j, beta_j) of the Volkov state with momentum p.

    Both are insensitive to the quasimomentum shift (kappa.q = kappa.p and
    a.q = a.p), so either the free or the dressed momentum may be passed.
    """
    kp = mdot(laser.kappa, p)
    if np.any(np.abs(kp) < 1e-300):
        raise DegenerateKinematicsError("kappa.p = 0 in vertex_args")
    alpha = laser.e_charge * mdot(laser.a, p) / kp
    beta = laser.e2a2 / (8.0 * kp)
    return alpha, beta


def quadrature_size(order_max: float, alpha: float, beta: float) -> int:
    """Power-of-two sample count for the periodic rule, per the bound above."""
    need = 4.0 * (abs(order_max) + abs(alpha) + 2.0 * abs(beta)) + 64.0
    m = 64
    while m < need:
        m *= 2
    return m


def fourier_tables(alpha, beta, order_max: float) -> np.ndarray:
    """A_{0,N} for all orders at once, as a circular table.

    alpha, beta: arrays of shape (B,).  Returns (B, M) real array `t` with
    t[b, N % M] = A_{0,N}(alpha_b, beta_b); M is common to the batch.
    The reality of the coefficients (exact for the symmetric trapezoidal
    sum) is asserted to 1e-10 and the imaginary part discarded.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    m = quadrature_size(order_max, float(np.max(np.abs(alpha))), float(np.max(np.abs(beta))))
    theta = 2.0 * np.pi * np.arange(m) / m
    phase = -alpha[:, None] * np.sin(theta) + beta[:, None] * np.sin(2.0 * theta)
    coeff = np.fft.ifft(np.exp(1j * phase), axis=-1)
    worst = float(np.max(np.abs(coeff.imag)))
    if worst > _REALITY_TOL:
        raise FloatingPointError(f"generalized Bessel table lost reality ({worst:.3e})")
    return np.ascontiguousarray(coeff.real)


def gather_orders(table: np.ndarray, orders: np.ndarray) -> np.ndarray:
    """A_{h,N} for h = 0, 1, 2 at the requested orders.

    table: (B, M) from fourier_tables; orders: integer array (B, S).
    Returns (B, S, 3).
    """
    m = table.shape[-1]
    rows = np.arange(table.shape[0])[:, None]
    a0m1 = table[rows, (orders - 1) % m]
    a0 = table[rows, orders % m]
    a0p1 = table[rows, (orders + 1) % m]
    a0m2 = table[rows, (orders - 2) % m]
    a0p2 = table[rows, (orders + 2) % m]
    a1 = 0.5 * (a0m1 + a0p1)
    a2 = 0.25 * (a0m2 + 2.0 * a0 + a0p2)
    return np.stack([a0, a1, a2], axis=-1)


@dataclass(frozen=True)
class BesselBatch:
    """All three h-families on a contiguous window of orders."""

    alpha: float
    beta: float
    n_lo: int
    n_hi: int
    values: np.ndarray  # (K, 3) with K = n_hi - n_lo + 1

    def a(self, h: int, n: int) -> float:
        if not (self.n_lo <= n <= self.n_hi):
            raise IndexError(f"order {n} outside [{self.n_lo}, {self.n_hi}]")
        return float(self.values[n - self.n_lo, h])


def genbessel_batch(alpha: float, beta: float, n_lo: int, n_hi: int) -> BesselBatch:
    """Scalar-argument batch over the inclusive order window [n_lo, n_hi]."""
    if n_hi < n_lo:
        raise ValueError("empty order window")
    table = fourier_tables(alpha, beta, max(abs(n_lo), abs(n_hi)))
    orders = np.arange(n_lo, n_hi + 1)[None, :]
    vals = gather_orders(table, orders)[0]
    return BesselBatch(float(alpha), float(beta), int(n_lo), int(n_hi), vals)


def support_halfwidth(alpha, beta, margin: float = DECAY_MARGIN):
    """Order beyond which |A_{h,N}| is negligible for these arguments."""
    return np.abs(alpha) + 2.0 * np.abs(beta) + margin


class BesselCache:
    """Small memo for repeated scalar argument pairs (thread-safe)."""

    def __init__(self, max_entries: int = 4096):
        import threading

        self._lock = threading.Lock()
        self._data: dict = {}
        self._max = max_entries

    def batch(self, alpha: float, beta: float, n_lo: int, n_hi: int) -> BesselBatch:
        key = (float(alpha), float(beta), int(n_lo), int(n_hi))
        with self._lock:
            hit = self._data.get(key)
        if hit is not None:
            return hit
        out = genbessel_batch(*key)
        with self._lock:
            if len(self._data) >= self._max:
                self._data.clear()
            self._data[key] = out
        return out
