"""Minkowski algebra and the transverse polarization basis."""

import numpy as np
import pytest

from dcompton.fourvec import (
    fv,
    lightlike,
    mdot,
    msq,
    pol_basis,
    three_norm,
    timelike_energy,
    unit_lightlike,
)


def test_metric_signature():
    t = fv(1.0, 0.0, 0.0, 0.0)
    x = fv(0.0, 1.0, 0.0, 0.0)
    assert msq(t) == 1.0
    assert msq(x) == -1.0
    assert mdot(t, x) == 0.0


def test_mdot_broadcasts():
    p = fv(2.0, 0.0, 0.0, 1.0)
    batch = np.stack([fv(1.0, 0.0, 0.0, 0.0), fv(3.0, 1.0, 1.0, 1.0)])
    out = mdot(p, batch)
    assert out.shape == (2,)
    np.testing.assert_allclose(out, [2.0, 5.0])


def test_lightlike_is_null():
    rng = np.random.default_rng(7)
    for _ in range(50):
        w = rng.uniform(0.1, 10.0)
        th = rng.uniform(0.0, np.pi)
        ps = rng.uniform(0.0, 2 * np.pi)
        k = lightlike(w, th, ps)
        assert abs(msq(k)) < 1e-12 * w**2
        assert abs(three_norm(k) - w) < 1e-12 * w
        assert abs(timelike_energy(k) - w) < 1e-12 * w


def test_unit_lightlike_matches_scaled():
    k = lightlike(3.5, 0.4, 1.2)
    kbar = unit_lightlike(0.4, 1.2)
    np.testing.assert_allclose(k, 3.5 * kbar, rtol=1e-15)


@pytest.mark.parametrize("theta,psi", [(0.0, 0.0), (1e-3, 0.7), (0.4, 2.9), (np.pi / 2, 4.0)])
def test_pol_basis_orthonormal_transverse(theta, psi):
    k = unit_lightlike(theta, psi)
    e1, e2 = pol_basis(theta, psi)
    # purely spatial, orthonormal, both orthogonal to k
    for e in (e1, e2):
        assert e[0] == 0.0
        assert abs(msq(e) + 1.0) < 1e-14
        assert abs(mdot(e, k)) < 1e-14
    assert abs(mdot(e1, e2)) < 1e-14


def test_pol_basis_forward_limit_cartesian():
    e1, e2 = pol_basis(0.0, 0.0)
    np.testing.assert_allclose(e1, fv(0.0, 1.0, 0.0, 0.0), atol=1e-15)
    np.testing.assert_allclose(e2, fv(0.0, 0.0, 1.0, 0.0), atol=1e-15)
