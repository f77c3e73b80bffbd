import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ksquad import kepler, ksreg, quat
from ksquad.errors import DomainError, PreconditionError
from ksquad.kepler import CartesianOrbitState, KeplerMassParams
from ksquad.ksreg import KSState

UNIT = KeplerMassParams(1.0, 1.0)
finite = st.floats(-3, 3, allow_nan=False)
quats = st.tuples(finite, finite, finite, finite).map(np.array)


@pytest.mark.parametrize("z, w, expected", [
    (quat.ONE, 2 * quat.ONE, 0.0),
    (quat.ONE, quat.I, -1.0),
    (quat.I, -quat.ONE, -1.0),
])
def test_bl_examples(z, w, expected):
    assert ksreg.bl(z, w) == expected


@given(quats, quats, st.floats(0, 2 * math.pi))
def test_bl_fiber_invariant(z, w, theta):
    s = ksreg.fiber_action(theta, KSState(z, w))
    assert math.isclose(s.bl, ksreg.bl(z, w), abs_tol=1e-12 * (1 + z @ z + w @ w))


@given(quats, quats)
def test_bl_gradient(z, w):
    gz, gw = ksreg.bl_gradient(z, w)
    eps = 1e-6
    for k, e in enumerate(np.eye(4)):
        dz = (ksreg.bl(z + eps * e, w) - ksreg.bl(z - eps * e, w)) / (2 * eps)
        dw = (ksreg.bl(z, w + eps * e) - ksreg.bl(z, w - eps * e)) / (2 * eps)
        assert dz == pytest.approx(gz[k], abs=1e-7)
        assert dw == pytest.approx(gw[k], abs=1e-7)


@pytest.mark.parametrize("z, w, Q, P", [
    (quat.ONE, 2 * quat.ONE, [1, 0, 0], [1, 0, 0]),
    (quat.J, 0 * quat.ONE, [-1, 0, 0], [0, 0, 0]),
    (quat.I, 2 * quat.I, [1, 0, 0], [1, 0, 0]),
])
def test_ks_map_examples(z, w, Q, P):
    c = ksreg.ks_map(KSState(z, w))
    np.testing.assert_allclose(c.Q, Q, atol=1e-15)
    np.testing.assert_allclose(c.P, P, atol=1e-15)


def test_ks_map_collision():
    with pytest.raises(DomainError):
        ksreg.ks_map(KSState(np.zeros(4), quat.ONE))


def test_fiber_action_examples():
    s = KSState(quat.ONE, 2 * quat.ONE)
    np.testing.assert_array_equal(ksreg.fiber_action(0.0, s).z, s.z)
    half = ksreg.fiber_action(math.pi, s)
    np.testing.assert_allclose(half.z, -s.z, atol=1e-15)
    np.testing.assert_allclose(half.w, -s.w, atol=1e-15)
    q = ksreg.fiber_action(math.pi / 2, s)
    np.testing.assert_allclose(q.z, quat.I, atol=1e-15)
    np.testing.assert_allclose(q.w, 2 * quat.I, atol=1e-15)


@pytest.mark.parametrize("Q, P, z, w", [
    ([1, 0, 0], [1, 0, 0], quat.ONE, 2 * quat.ONE),
    ([-1, 0, 0], [0, 0, 0], quat.J, 0 * quat.ONE),
])
def test_ks_lift_examples(Q, P, z, w):
    s = ksreg.ks_lift(CartesianOrbitState(P=P, Q=Q))
    np.testing.assert_allclose(s.z, z, atol=1e-15)
    np.testing.assert_allclose(s.w, w, atol=1e-15)
    back = ksreg.ks_map(s)
    np.testing.assert_allclose(back.Q, Q, atol=1e-15)


def test_ks_lift_collision():
    with pytest.raises(DomainError):
        ksreg.ks_lift(CartesianOrbitState(P=[1, 0, 0], Q=[0, 0, 0]))


def test_lift_roundtrip_and_cone(rng):
    for _ in range(200):
        c = CartesianOrbitState(P=rng.normal(size=3), Q=rng.normal(size=3))
        theta = rng.uniform(0, 2 * math.pi)
        s = ksreg.ks_lift(c, theta)
        assert abs(s.bl) < 1e-12 * (1 + s.w @ s.w)
        back = ksreg.ks_map(s)
        np.testing.assert_allclose(back.Q, c.Q, atol=1e-12)
        np.testing.assert_allclose(back.P, c.P, atol=1e-12 * max(1, np.linalg.norm(c.P)))
        assert ksreg.ks_momentum_residual(s) < 1e-12


def test_ks_jacobian_matches_differences(rng):
    z, w = rng.normal(size=(2, 4))

    def fn(x):
        Q, P4 = ksreg.ks_arrays(x[:4], x[4:])
        return np.concatenate([Q, P4[1:]])

    x = np.concatenate([z, w])
    eps = 1e-6
    fd = np.stack([(fn(x + eps * e) - fn(x - eps * e)) / (2 * eps) for e in np.eye(8)], axis=1)
    np.testing.assert_allclose(ksreg.ks_jacobian(z, w), fd, atol=1e-7)


def test_ks_hamiltonian_examples():
    assert ksreg.ks_hamiltonian(KSState(quat.ONE, 2 * quat.ONE), UNIT, 0.5) == 0.0
    assert ksreg.ks_hamiltonian(KSState(np.zeros(4), np.zeros(4)), UNIT, 0.5) == -1.0


def test_ks_hamiltonian_on_cone_is_scaled_energy(rng):
    for _ in range(50):
        m = KeplerMassParams(*rng.uniform(0.3, 3, size=2))
        f = rng.uniform(0.1, 2)
        c = CartesianOrbitState(P=rng.normal(size=3), Q=rng.normal(size=3))
        s = ksreg.ks_lift(c, rng.uniform(0, 6))
        r = np.linalg.norm(c.Q)
        expected = r * (kepler.kepler_energy(c, m) + f)
        assert ksreg.ks_hamiltonian(s, m, f) == pytest.approx(expected, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("z, w, Q, P", [
    (1 + 0j, 2 + 0j, 1 + 0j, 1 + 0j),
    (1j, 0j, -1 + 0j, 0j),
    (-1 + 0j, -2 + 0j, 1 + 0j, 1 + 0j),
])
def test_lc_map_examples(z, w, Q, P):
    assert ksreg.lc_map(z, w) == (pytest.approx(Q), pytest.approx(P))


@given(st.complex_numbers(max_magnitude=5).filter(lambda z: abs(z) > 1e-3),
       st.complex_numbers(max_magnitude=5))
def test_lc_map_two_to_one(z, w):
    a, b = ksreg.lc_map(z, w), ksreg.lc_map(-z, -w)
    assert cmath.isclose(a[0], b[0], abs_tol=1e-12) and cmath.isclose(a[1], b[1], abs_tol=1e-9)


def test_lc_jacobian_matches_differences(rng):
    x = rng.normal(size=4)

    def fn(v):
        Q, P = ksreg.lc_map(complex(v[0], v[1]), complex(v[2], v[3]))
        return np.array([Q.real, Q.imag, P.real, P.imag])

    eps = 1e-6
    fd = np.stack([(fn(x + eps * e) - fn(x - eps * e)) / (2 * eps) for e in np.eye(4)], axis=1)
    np.testing.assert_allclose(ksreg.lc_jacobian(x), fd, atol=1e-7)


@pytest.mark.parametrize("e1, e2, x, y", [
    ([1, 0, 0], [0, 1, 0], quat.ONE, -quat.K),
    ([1, 0, 0], [0, 0, 1], quat.ONE, quat.J),
])
def test_lc_plane_basis_examples(e1, e2, x, y):
    bx, by = ksreg.lc_plane_basis(e1, e2)
    np.testing.assert_allclose(bx, x, atol=1e-15)
    np.testing.assert_allclose(by, y, atol=1e-15)


def _orthonormal_pair(rng):
    a, b = rng.normal(size=(2, 3))
    a /= np.linalg.norm(a)
    b -= (b @ a) * a
    return a, b / np.linalg.norm(b)


def test_lc_plane_basis_properties(rng):
    for _ in range(100):
        e1, e2 = _orthonormal_pair(rng)
        x, y = ksreg.lc_plane_basis(e1, e2)
        assert abs(x @ y) < 1e-12 and abs(x @ x - 1) < 1e-12 and abs(y @ y - 1) < 1e-12
        xiy = quat.qmul(quat.qmul(quat.conj(x), quat.I), y)
        np.testing.assert_allclose(xiy, quat.from_vector(e2), atol=1e-12)
        np.testing.assert_allclose(quat.hopf(x), e1, atol=1e-12)


def test_lc_plane_basis_rejects_non_orthonormal():
    with pytest.raises(PreconditionError):
        ksreg.lc_plane_basis([1, 0, 0], [1, 1, 0])


@pytest.mark.parametrize("e1, e2", [([1, 0, 0], [0, 1, 0]), ([1, 0, 0], [0, 0, 1])])
def test_ks_restriction_fixed_planes(rng, e1, e2):
    for _ in range(20):
        c1, c2 = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
        assert ksreg.ks_restriction_check(e1, e2, c1, c2) < 1e-12
    # z purely along the second basis vector
    assert ksreg.ks_restriction_check(e1, e2, 0.7j, complex(*rng.normal(size=2))) < 1e-12


def test_ks_restriction_random_planes(rng):
    for _ in range(100):
        e1, e2 = _orthonormal_pair(rng)
        c1, c2 = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
        assert ksreg.ks_restriction_check(e1, e2, c1, c2) < 1e-12


def test_ks_ellipse_zero_level_matches_physical_elements():
    s = KSState(quat.ONE, 2 * quat.ONE)
    el = ksreg.ks_ellipse_elements(s, UNIT, 0.5)
    ref = kepler.elements_from_state(CartesianOrbitState(P=[1, 0, 0], Q=[1, 0, 0]), UNIT)
    assert (el.a, el.e, el.G) == pytest.approx((ref.a, ref.e, ref.G))
    assert ksreg.kf_factor(s, UNIT, 0.5) == 1.0


def test_ks_ellipse_mass_shift_and_boundary():
    s = KSState(quat.ONE, 2 * quat.ONE)
    shifted = ksreg.ks_ellipse_mass(s, UNIT, 1.0)
    assert shifted.M == pytest.approx(1.5)
    assert ksreg.kf_factor(s, UNIT, 1.0) == pytest.approx(math.sqrt(1 / 1.5))
    with pytest.raises(DomainError):
        ksreg.ks_ellipse_mass(KSState(np.zeros(4), np.zeros(4)), UNIT, 0.5)
