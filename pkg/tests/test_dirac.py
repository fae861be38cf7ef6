"""Gamma-matrix algebra and free spinors."""

import numpy as np
import pytest

from dcompton.dirac import (
    GAMMA,
    GAMMA0,
    bilinear,
    dirac_adjoint,
    free_spinor_pair,
    gamma_matrices,
    slash,
    slash_tensor,
)
from dcompton.fourvec import METRIC_DIAG, fv


@pytest.mark.parametrize("basis", ["dirac", "weyl"])
def test_clifford_algebra(basis):
    g = gamma_matrices(basis)
    eye = np.eye(4)
    for mu in range(4):
        for nu in range(4):
            anti = g[mu] @ g[nu] + g[nu] @ g[mu]
            want = 2.0 * (METRIC_DIAG[mu] if mu == nu else 0.0) * eye
            np.testing.assert_allclose(anti, want, atol=1e-15)


@pytest.mark.parametrize("basis", ["dirac", "weyl"])
def test_gamma_hermiticity(basis):
    # gamma^0 gamma^mu^dagger gamma^0 = gamma^mu
    g = gamma_matrices(basis)
    for mu in range(4):
        np.testing.assert_allclose(
            g[0] @ g[mu].conj().T @ g[0], g[mu], atol=1e-15
        )


def test_slash_square_is_invariant():
    rng = np.random.default_rng(3)
    p = fv(*rng.normal(size=4))
    ps = slash(p)
    p2 = p[0] ** 2 - p[1] ** 2 - p[2] ** 2 - p[3] ** 2
    np.testing.assert_allclose(ps @ ps, p2 * np.eye(4), atol=1e-12)


def test_slash_batched():
    rng = np.random.default_rng(5)
    batch = rng.normal(size=(7, 4))
    out = slash(batch)
    assert out.shape == (7, 4, 4)
    np.testing.assert_allclose(out[3], slash(batch[3]))


def test_dirac_adjoint_of_slash_is_slash():
    # real four-vector: bar(pslash) = pslash
    p = fv(0.3, -1.1, 0.4, 2.0)
    np.testing.assert_allclose(dirac_adjoint(slash(p)), slash(p), atol=1e-14)


@pytest.mark.parametrize("basis", ["dirac", "weyl"])
def test_free_spinors_satisfy_dirac_equation(basis):
    rng = np.random.default_rng(11)
    g = gamma_matrices(basis)
    st = slash_tensor(g)
    for _ in range(20):
        three = rng.normal(scale=3.0, size=3)
        mass = rng.uniform(0.5, 2.0)
        e = np.sqrt(mass**2 + three @ three)
        p = fv(e, *three)
        u = free_spinor_pair(p, mass=mass, basis=basis)
        resid = np.einsum("ij,rj->ri", slash(p, st) - mass * np.eye(4), u)
        assert np.max(np.abs(resid)) < 1e-12 * e


def test_spinor_normalization_and_completeness():
    p = fv(np.sqrt(1.0 + 14.0), 1.0, 2.0, 3.0)
    u = free_spinor_pair(p)
    # ubar_r u_s = delta_rs
    gram = np.einsum("ri,ij,sj->rs", u.conj(), GAMMA0, u)
    np.testing.assert_allclose(gram, np.eye(2), atol=1e-13)
    # sum_r u_r ubar_r = (pslash + m) / (2 m)
    proj = np.einsum("ri,rj->ij", u, u.conj() @ GAMMA0)
    np.testing.assert_allclose(proj, (slash(p) + np.eye(4)) / 2.0, atol=1e-13)


def test_free_spinor_rejects_off_shell():
    with pytest.raises(ValueError):
        free_spinor_pair(fv(2.0, 0.0, 0.0, 0.5), mass=1.0)


def test_bilinear_matches_explicit_contraction():
    rng = np.random.default_rng(13)
    u_in = rng.normal(size=4) + 1j * rng.normal(size=4)
    u_out = rng.normal(size=4) + 1j * rng.normal(size=4)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    want = u_out.conj() @ GAMMA0 @ m @ u_in
    np.testing.assert_allclose(bilinear(u_out, m, u_in), want, rtol=1e-14)


def test_current_conservation_free_spinors():
    # q_mu ubar(p') gamma^mu u(p) = 0 for on-shell p, p' with q = p' - p
    rng = np.random.default_rng(17)
    for _ in range(10):
        t1, t2 = rng.normal(scale=2.0, size=(2, 3))
        p1 = fv(np.sqrt(1.0 + t1 @ t1), *t1)
        p2 = fv(np.sqrt(1.0 + t2 @ t2), *t2)
        u1 = free_spinor_pair(p1)
        u2 = free_spinor_pair(p2)
        q = p2 - p1
        for r in range(2):
            for s in range(2):
                cur = np.array(
                    [bilinear(u2[s], GAMMA[mu], u1[r]) for mu in range(4)]
                )
                div = q[0] * cur[0] - q[1:] @ cur[1:]
                assert abs(div) < 1e-12
