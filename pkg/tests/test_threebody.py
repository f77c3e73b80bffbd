import math

import numpy as np
import pytest

from ksquad import ksreg, quat, threebody
from ksquad.errors import DomainError
from ksquad.kepler import CartesianOrbitState
from ksquad.threebody import JacobiState, mass_params


def test_mass_params_equal_masses():
    m = mass_params(1, 1, 1)
    assert (m.sigma0, m.sigma1, m.mu1, m.mu2, m.M1, m.M2) == pytest.approx(
        (0.5, 0.5, 0.5, 2 / 3, 2, 3), abs=1e-15)


@pytest.mark.parametrize("m2", [1e-3, 1e-6, 1e-9])
def test_restricted_limit(m2):
    assert mass_params(1, 0.3, m2).mu2 == pytest.approx(m2, rel=2 * m2)


def test_sigma_sum(rng):
    for m in rng.uniform(0.01, 10, size=(50, 3)):
        p = mass_params(*m)
        assert abs(p.sigma0 + p.sigma1 - 1) < 1e-15


def test_masses_positive():
    with pytest.raises(DomainError):
        mass_params(1, 0, 1)


def _inertial(rng):
    return rng.normal(size=(3, 3)), rng.normal(size=(3, 3)) * 2


def test_jacobi_map(rng):
    m = mass_params(*rng.uniform(0.2, 3, size=3))
    p, q = _inertial(rng)
    js, P0, Q0 = threebody.jacobi_from_inertial(*p, *q, m)
    np.testing.assert_allclose(P0, p.sum(axis=0), atol=1e-15)
    np.testing.assert_allclose(js.Q1, q[1] - q[0], atol=1e-15)
    back = threebody.inertial_from_jacobi(js, P0, Q0, m)
    np.testing.assert_allclose(np.array(back[:3]), p, atol=1e-14)
    np.testing.assert_allclose(np.array(back[3:]), q, atol=1e-14)


def test_jacobi_map_preserves_symplectic_form(rng):
    m = mass_params(*rng.uniform(0.2, 3, size=3))

    def fn(x):
        js, P0, Q0 = threebody.jacobi_from_inertial(*x[9:].reshape(3, 3), *x[:9].reshape(3, 3), m)
        return np.concatenate([Q0, js.Q1, js.Q2, P0, js.P1, js.P2])

    x = rng.normal(size=18)
    J = np.stack([fn(x + e) - fn(x) for e in np.eye(18)], axis=1)
    Om = np.block([[np.zeros((9, 9)), -np.eye(9)], [np.eye(9), np.zeros((9, 9))]])
    np.testing.assert_allclose(J.T @ Om @ J, Om, atol=1e-13)


def test_hamiltonian_splitting_and_inertial_energy(rng):
    m = mass_params(1, 1, 1)
    for _ in range(20):
        p, q = _inertial(rng)
        p -= p.mean(axis=0)
        js, _, _ = threebody.jacobi_from_inertial(*p, *q, m)
        F, kep, pert = threebody.hamiltonians(js, m)
        assert F - (kep + pert) == 0.0
        assert F == pytest.approx(threebody.inertial_energy(p, q, m), abs=1e-12)


def test_perturbation_decays_cubically(rng):
    m = mass_params(1, 0.4, 2)
    Q1 = rng.normal(size=3)
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    ratio = threebody.perturbation(Q1, 200 * d, m) / threebody.perturbation(Q1, 100 * d, m)
    assert ratio == pytest.approx(1 / 8, rel=0.05)
    assert threebody.perturbation(np.zeros(3), d, m) == 0.0


def test_perturbation_collision():
    m = mass_params(1, 1, 1)
    with pytest.raises(DomainError):
        threebody.perturbation([1, 0, 0], [-0.5, 0, 0], m)


def _fd_grad(fn, x, eps=1e-6):
    return np.array([(fn(x + eps * e) - fn(x - eps * e)) / (2 * eps) for e in np.eye(len(x))])


def test_jacobi_gradient(rng):
    m = mass_params(0.8, 1.3, 0.6)
    H = threebody.jacobi_hamiltonian(m)
    x = np.concatenate([[1, 0.2, 0.1], [4, -1, 0.5], rng.normal(size=6)])
    np.testing.assert_allclose(H.gradient(x), _fd_grad(H.value, x), atol=1e-7)


def test_reg_gradient(rng):
    m = mass_params(0.8, 1.3, 0.6)
    H = threebody.reg_three_body_hamiltonian(m, 0.7)
    x = np.concatenate([0.6 * rng.normal(size=4), [4, -1, 0.5], rng.normal(size=4),
                        rng.normal(size=3)])
    np.testing.assert_allclose(H.gradient(x), _fd_grad(H.value, x), atol=1e-7)


def test_reg_at_collision():
    m = mass_params(1, 1, 1)
    F, kep, pert = threebody.reg_hamiltonian(np.zeros(4), np.zeros(4), [0, 0.3, 0],
                                             [3, 0, 0], m, 0.5)
    assert kep == -m.mu1 * m.M1 and pert == 0.0


def test_reg_identity_on_cone(rng):
    m = mass_params(1, 0.5, 2)
    f = 0.8
    for _ in range(20):
        c = CartesianOrbitState(P=rng.normal(size=3), Q=0.5 * rng.normal(size=3))
        s = ksreg.ks_lift(c, rng.uniform(0, 6))
        P2, Q2 = rng.normal(size=3), 5 + rng.normal(size=3)
        F_reg = threebody.reg_hamiltonian(s.z, s.w, P2, Q2, m, f)[0]
        js = JacobiState(P1=c.P, Q1=c.Q, P2=P2, Q2=Q2)
        F = threebody.hamiltonians(js, m)[0]
        r = float(s.z @ s.z)
        assert F_reg == pytest.approx(r * (F + f), abs=1e-12 * max(1, abs(F_reg)))
        s2 = ksreg.fiber_action(1.1, s)
        F_rot = threebody.reg_hamiltonian(s2.z, s2.w, P2, Q2, m, f)[0]
        assert F_rot == pytest.approx(F_reg, abs=1e-13 * max(1, abs(F_reg)))


def test_angular_momentum_property():
    js = JacobiState(P1=[0, 1, 0], Q1=[1, 0, 0], P2=[0, 0, 1], Q2=[0, 2, 0])
    np.testing.assert_allclose(js.angular_momentum(), [2, 0, 1])


def test_outer_coefficient():
    m = mass_params(1, 1, 1)
    coef = threebody.outer_coefficient([0, 0, 0], [2, 0, 0], m, 1.0)
    assert coef == pytest.approx(1 - m.mu2 * m.M2 / 2)
    with pytest.raises(DomainError):
        threebody.outer_coefficient([0, 0, 0], [0, 0, 0], m, 1.0)
