"""Spatial three-body problem in Jacobi coordinates and its KS regularization.

With ``X = Q2 - sigma0 Q1`` and ``Y = Q2 + sigma1 Q1`` the Hamiltonian splits as

    F_Kep  = |P1|^2/(2 mu1) - mu1 M1/|Q1| + |P2|^2/(2 mu2) - mu2 M2/|Q2|
    F_pert = -mu1 m2 [ (1/|X| - 1/|Q2|)/sigma0 + (1/|Y| - 1/|Q2|)/sigma1 ]

on the zero total momentum level.  The regularized Hamiltonian lives on
``(z, w, P2, Q2)`` and equals ``|z|^2 (F o KS + f)`` on the constraint cone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quat
from .errors import DomainError
from .verify import Hamiltonian

COLLISION_TOL = 1e-12


@dataclass(frozen=True)
class ThreeBodyMasses:
    m0: float
    m1: float
    m2: float

    def __post_init__(self):
        if not (self.m0 > 0 and self.m1 > 0 and self.m2 > 0):
            raise DomainError("all masses must be positive")

    @property
    def M1(self) -> float:
        return self.m0 + self.m1

    @property
    def M2(self) -> float:
        return self.m0 + self.m1 + self.m2

    @property
    def sigma0(self) -> float:
        return self.m0 / self.M1

    @property
    def sigma1(self) -> float:
        return self.m1 / self.M1

    @property
    def mu1(self) -> float:
        return self.m0 * self.m1 / self.M1

    @property
    def mu2(self) -> float:
        return self.M1 * self.m2 / self.M2

    def with_m2(self, m2: float) -> "ThreeBodyMasses":
        return ThreeBodyMasses(self.m0, self.m1, m2)


def mass_params(m0: float, m1: float, m2: float) -> ThreeBodyMasses:
    return ThreeBodyMasses(float(m0), float(m1), float(m2))


@dataclass(frozen=True)
class JacobiState:
    P1: np.ndarray
    Q1: np.ndarray
    P2: np.ndarray
    Q2: np.ndarray

    def __post_init__(self):
        for name in ("P1", "Q1", "P2", "Q2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    def angular_momentum(self) -> np.ndarray:
        return np.cross(self.Q1, self.P1) + np.cross(self.Q2, self.P2)


def jacobi_from_inertial(p0, p1, p2, q0, q1, q2, masses: ThreeBodyMasses):
    """Jacobi coordinates ``(JacobiState, P0, Q0)`` of an inertial state."""
    p0, p1, p2, q0, q1, q2 = (np.asarray(a, dtype=float) for a in (p0, p1, p2, q0, q1, q2))
    s0, s1 = masses.sigma0, masses.sigma1
    P0 = p0 + p1 + p2
    P1 = p1 + s1 * p2
    P2 = p2
    Q0 = q0
    Q1 = q1 - q0
    Q2 = q2 - s0 * q0 - s1 * q1
    return JacobiState(P1, Q1, P2, Q2), P0, Q0


def inertial_from_jacobi(js: JacobiState, P0, Q0, masses: ThreeBodyMasses):
    """Inverse of :func:`jacobi_from_inertial`: ``(p0, p1, p2, q0, q1, q2)``."""
    P0 = np.asarray(P0, dtype=float)
    Q0 = np.asarray(Q0, dtype=float)
    s0, s1 = masses.sigma0, masses.sigma1
    p2 = js.P2
    p1 = js.P1 - s1 * js.P2
    p0 = P0 - js.P1 - s0 * js.P2
    q0 = Q0
    q1 = js.Q1 + Q0
    q2 = js.Q2 + Q0 + s1 * js.Q1
    return p0, p1, p2, q0, q1, q2


def inertial_energy(p, q, masses: ThreeBodyMasses) -> float:
    """Total energy of three bodies from inertial momenta and positions."""
    ms = (masses.m0, masses.m1, masses.m2)
    kin = sum(float(np.dot(p[k], p[k])) / (2.0 * ms[k]) for k in range(3))
    pot = 0.0
    for j in range(3):
        for k in range(j + 1, 3):
            pot -= ms[j] * ms[k] / float(np.linalg.norm(np.asarray(q[j]) - np.asarray(q[k])))
    return kin + pot


def _guard(Q1, Q2):
    X_scale = max(1.0, float(np.linalg.norm(Q2)))
    return COLLISION_TOL * X_scale


def perturbation(Q1, Q2, masses: ThreeBodyMasses) -> float:
    """``F_pert(Q1, Q2)``; finite at ``Q1 = 0`` where it vanishes."""
    Q1 = np.asarray(Q1, dtype=float)
    Q2 = np.asarray(Q2, dtype=float)
    s0, s1 = masses.sigma0, masses.sigma1
    X = Q2 - s0 * Q1
    Y = Q2 + s1 * Q1
    rx, ry, r2 = (float(np.linalg.norm(v)) for v in (X, Y, Q2))
    tol = _guard(Q1, Q2)
    if min(rx, ry, r2) < tol:
        raise DomainError("collision with the outer body")
    return -masses.mu1 * masses.m2 * ((1 / rx - 1 / r2) / s0 + (1 / ry - 1 / r2) / s1)


def perturbation_gradient(Q1, Q2, masses: ThreeBodyMasses) -> tuple[np.ndarray, np.ndarray]:
    """``(dF_pert/dQ1, dF_pert/dQ2)``."""
    Q1 = np.asarray(Q1, dtype=float)
    Q2 = np.asarray(Q2, dtype=float)
    s0, s1 = masses.sigma0, masses.sigma1
    X = Q2 - s0 * Q1
    Y = Q2 + s1 * Q1
    rx, ry, r2 = (float(np.linalg.norm(v)) for v in (X, Y, Q2))
    if min(rx, ry, r2) < _guard(Q1, Q2):
        raise DomainError("collision with the outer body")
    c = -masses.mu1 * masses.m2
    gX = X / rx**3
    gY = Y / ry**3
    g2 = Q2 / r2**3
    dQ1 = c * (gX - gY)
    dQ2 = c * ((-gX + g2) / s0 + (-gY + g2) / s1)
    return dQ1, dQ2


def kepler_parts(js: JacobiState, masses: ThreeBodyMasses) -> float:
    r1 = float(np.linalg.norm(js.Q1))
    r2 = float(np.linalg.norm(js.Q2))
    if r1 < COLLISION_TOL or r2 < COLLISION_TOL:
        raise DomainError("collision: Q1 = 0 or Q2 = 0")
    return (float(js.P1 @ js.P1) / (2 * masses.mu1) - masses.mu1 * masses.M1 / r1
            + float(js.P2 @ js.P2) / (2 * masses.mu2) - masses.mu2 * masses.M2 / r2)


def hamiltonians(js: JacobiState, masses: ThreeBodyMasses) -> tuple[float, float, float]:
    """``(F, F_Kep, F_pert)``."""
    kep = kepler_parts(js, masses)
    pert = perturbation(js.Q1, js.Q2, masses)
    return kep + pert, kep, pert


def hamiltonian_gradient(js: JacobiState, masses: ThreeBodyMasses) -> dict[str, np.ndarray]:
    """Partial derivatives of ``F`` keyed by ``P1, Q1, P2, Q2``."""
    r1 = float(np.linalg.norm(js.Q1))
    r2 = float(np.linalg.norm(js.Q2))
    dQ1, dQ2 = perturbation_gradient(js.Q1, js.Q2, masses)
    return {
        "P1": js.P1 / masses.mu1,
        "Q1": masses.mu1 * masses.M1 * js.Q1 / r1**3 + dQ1,
        "P2": js.P2 / masses.mu2,
        "Q2": masses.mu2 * masses.M2 * js.Q2 / r2**3 + dQ2,
    }


def jacobi_hamiltonian(masses: ThreeBodyMasses) -> Hamiltonian:
    """``F`` on the chart ``x = (Q1, Q2, P1, P2)``."""

    def unpack(x):
        return JacobiState(P1=x[6:9], Q1=x[0:3], P2=x[9:12], Q2=x[3:6])

    def value(x):
        return hamiltonians(unpack(x), masses)[0]

    def gradient(x):
        g = hamiltonian_gradient(unpack(x), masses)
        return np.concatenate([g["Q1"], g["Q2"], g["P1"], g["P2"]])

    return Hamiltonian(value, gradient)


def outer_coefficient(P2, Q2, masses: ThreeBodyMasses, f: float) -> float:
    """``f + |P2|^2/(2 mu2) - mu2 M2/|Q2|``."""
    r2 = float(np.linalg.norm(Q2))
    if r2 < COLLISION_TOL:
        raise DomainError("Q2 = 0")
    return f + float(np.dot(P2, P2)) / (2 * masses.mu2) - masses.mu2 * masses.M2 / r2


def reg_hamiltonian(z, w, P2, Q2, masses: ThreeBodyMasses, f: float
                    ) -> tuple[float, float, float]:
    """``(Freg, Freg_Kep, Freg_pert)`` of the regularized three-body problem."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    r = float(z @ z)
    kep = float(w @ w) / (8 * masses.mu1) + outer_coefficient(P2, Q2, masses, f) * r \
        - masses.mu1 * masses.M1
    pert = r * perturbation(quat.hopf(z), Q2, masses)
    return kep + pert, kep, pert


def reg_hamiltonian_gradient(z, w, P2, Q2, masses: ThreeBodyMasses, f: float
                             ) -> dict[str, np.ndarray]:
    """Partial derivatives of ``Freg`` keyed by ``z, w, P2, Q2``."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    Q2 = np.asarray(Q2, dtype=float)
    P2 = np.asarray(P2, dtype=float)
    r = float(z @ z)
    Q1 = quat.hopf(z)
    pert = perturbation(Q1, Q2, masses)
    dQ1, dQ2 = perturbation_gradient(Q1, Q2, masses)
    r2 = float(np.linalg.norm(Q2))
    coef = outer_coefficient(P2, Q2, masses, f)
    dz = 2 * z * (coef + pert) + r * (quat.hopf_jacobian(z).T @ dQ1)
    return {
        "z": dz,
        "w": w / (4 * masses.mu1),
        "P2": r * P2 / masses.mu2,
        "Q2": r * (masses.mu2 * masses.M2 * Q2 / r2**3 + dQ2),
    }


def reg_three_body_hamiltonian(masses: ThreeBodyMasses, f: float) -> Hamiltonian:
    """``Freg`` on the 14-dimensional chart ``x = (z, Q2, w, P2)``."""

    def value(x):
        return reg_hamiltonian(x[0:4], x[7:11], x[11:14], x[4:7], masses, f)[0]

    def gradient(x):
        g = reg_hamiltonian_gradient(x[0:4], x[7:11], x[11:14], x[4:7], masses, f)
        return np.concatenate([g["z"], g["Q2"], g["w"], g["P2"]])

    return Hamiltonian(value, gradient)
