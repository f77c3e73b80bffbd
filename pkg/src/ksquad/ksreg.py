"""Levi-Civita and Kustaanheimo-Stiefel regularization of the Kepler problem.

Regularized phase points are pairs ``(z, w)`` of quaternions (position and
momentum) with symplectic form ``Re(dw^ ^ dz)``.  The KS map

    Q = conj(z) i z,    P = conj(z) i w / (2 |z|^2)

sends the cone ``BL(z, w) = Re(conj(z) i w) = 0`` onto the physical phase space;
its fibers are the circles ``(e^{i theta} z, e^{i theta} w)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quat
from .errors import DomainError, PreconditionError
from .kepler import (
    CartesianOrbitState,
    DelaunayElements,
    KeplerMassParams,
    elements_from_state,
)

ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class KSState:
    z: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float))
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))

    @property
    def bl(self) -> float:
        return bl(self.z, self.w)

    def on_sigma(self, tol: float = 1e-10) -> bool:
        return abs(self.bl) <= tol


@dataclass(frozen=True)
class RegEnergyConfig:
    """Energy offset ``f > 0`` and regularized energy ``ftilde`` (the value of K)."""

    f: float
    ftilde: float = 0.0

    def __post_init__(self):
        if not self.f > 0:
            raise DomainError("the energy offset f must be positive")


def bl(z, w):
    """Bilinear relation ``Re(conj(z) i w)``; broadcasts over leading axes."""
    return quat.inner(z, quat.qmul(quat.I, w))


def bl_gradient(z, w):
    """Gradient of :func:`bl` as ``(d/dz, d/dw)``."""
    return quat.qmul(quat.I, w), -quat.qmul(quat.I, z)


def ks_arrays(z, w):
    """Vectorized KS map returning ``(Q, P4)``.

    ``Q`` is a 3-vector array and ``P4`` the full quaternion momentum, whose real
    part equals ``BL / (2 |z|^2)``.
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    zc_i = quat.qmul(quat.conj(z), quat.I)
    Q = quat.qmul(zc_i, z)[..., 1:]
    r2 = np.sum(z * z, axis=-1, keepdims=True)
    P4 = quat.qmul(zc_i, w) / (2.0 * r2)
    return Q, P4


def ks_jacobian(z, w):
    """Analytic Jacobian of ``(z, w) -> (Q, Im P)`` as a ``(6, 8)`` matrix.

    Rows are ``(Q1, Q2, Q3, P1, P2, P3)``, columns ``(z0..z3, w0..w3)``.
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    r2 = float(z @ z)
    zc_i = quat.qmul(quat.conj(z), quat.I)
    num = quat.qmul(zc_i, w)
    jac = np.zeros((6, 8))
    basis = np.eye(4)
    for k in range(4):
        dz = basis[k]
        dzc_i = quat.qmul(quat.conj(dz), quat.I)
        dQ = quat.qmul(dzc_i, z) + quat.qmul(zc_i, dz)
        dnum = quat.qmul(dzc_i, w)
        dP = dnum / (2 * r2) - num * (2.0 * z[k]) / (2 * r2 * r2)
        jac[:3, k] = dQ[1:]
        jac[3:, k] = dP[1:]
        dP_w = quat.qmul(zc_i, dz) / (2 * r2)
        jac[3:, 4 + k] = dP_w[1:]
    return jac


def ks_map(s: KSState) -> CartesianOrbitState:
    """Physical state of a regularized point.

    ``P`` is forced into the imaginary quaternions; the discarded real part is
    available from :func:`ks_momentum_residual`.
    """
    if not np.any(s.z):
        raise DomainError("the KS map is undefined at z = 0")
    Q, P4 = ks_arrays(s.z, s.w)
    return CartesianOrbitState(P=P4[1:], Q=Q)


def ks_momentum_residual(s: KSState) -> float:
    """``|Re P|``, which vanishes exactly on the constraint cone."""
    return abs(bl(s.z, s.w)) / (2.0 * float(s.z @ s.z))


def fiber_action(theta: float, s: KSState) -> KSState:
    rot = quat.exp_i(theta)
    return KSState(quat.qmul(rot, s.z), quat.qmul(rot, s.w))


def ks_lift(c: CartesianOrbitState, theta: float = 0.0) -> KSState:
    """Preimage of a physical state on the cone, on the fiber angle ``theta``.

    ``theta = 0`` is the section of :func:`quat.hopf_section`; the momentum is
    ``w = -2 i z P``.
    """
    if not np.any(c.Q):
        raise DomainError("cannot lift a collision state (Q = 0)")
    z = quat.hopf_section(c.Q)
    w = -2.0 * quat.qmul(quat.qmul(quat.I, z), quat.from_vector(c.P))
    s = KSState(z, w)
    return fiber_action(theta, s) if theta else s


def ks_hamiltonian(s: KSState, m: KeplerMassParams, f: float) -> float:
    """Regularized Kepler Hamiltonian ``|w|^2/(8 mu) + f |z|^2 - mu M``."""
    return float(s.w @ s.w) / (8.0 * m.mu) + f * float(s.z @ s.z) - m.mu * m.M


def ks_hamiltonian_gradient(s: KSState, m: KeplerMassParams, f: float):
    """``(dK/dz, dK/dw)``."""
    return 2.0 * f * s.z, s.w / (4.0 * m.mu)


def lc_map(z: complex, w: complex) -> tuple[complex, complex]:
    """Levi-Civita map ``(z, w) -> (Q, P) = (z^2, w / (2 conj z))``."""
    if z == 0:
        raise DomainError("the Levi-Civita map is undefined at z = 0")
    return z * z, w / (2.0 * z.conjugate())


def lc_jacobian(x) -> np.ndarray:
    """Jacobian of the Levi-Civita map in real coordinates.

    ``x = (z1, z2, w1, w2)``; output rows are ``(Q1, Q2, P1, P2)``.
    """
    z1, z2, w1, w2 = x
    # Q = (z1^2 - z2^2, 2 z1 z2); P = w z / (2 |z|^2).
    r2 = z1 * z1 + z2 * z2
    p1n = w1 * z1 - w2 * z2
    p2n = w1 * z2 + w2 * z1
    jac = np.zeros((4, 4))
    jac[0] = [2 * z1, -2 * z2, 0, 0]
    jac[1] = [2 * z2, 2 * z1, 0, 0]
    jac[2] = [w1 / (2 * r2) - p1n * z1 / r2**2, -w2 / (2 * r2) - p1n * z2 / r2**2,
              z1 / (2 * r2), -z2 / (2 * r2)]
    jac[3] = [w2 / (2 * r2) - p2n * z1 / r2**2, w1 / (2 * r2) - p2n * z2 / r2**2,
              z2 / (2 * r2), z1 / (2 * r2)]
    return jac


def _check_orthonormal(e1, e2):
    if (abs(np.linalg.norm(e1) - 1) > ORTHO_TOL or abs(np.linalg.norm(e2) - 1) > ORTHO_TOL
            or abs(float(np.dot(e1, e2))) > ORTHO_TOL):
        raise PreconditionError("e1, e2 must be orthonormal 3-vectors")


def lc_plane_basis(e1, e2) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis ``(x, y)`` of a Levi-Civita plane over the plane ``span(e1, e2)``.

    ``x`` is the section preimage of ``e1`` under the Hopf map and
    ``y = -i x e2``, so that ``conj(x) i x = e1`` and ``conj(x) i y = e2``.
    """
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    _check_orthonormal(e1, e2)
    x = quat.hopf_section(e1)
    y = -quat.qmul(quat.qmul(quat.I, x), quat.from_vector(e2))
    return x, y


def ks_restriction_check(e1, e2, c1: complex, c2: complex) -> float:
    """Distance between KS restricted to a Levi-Civita plane and the LC map.

    The plane point is ``z = Re c1 x + Im c1 y`` with momentum
    ``w = Re c2 x + Im c2 y``.  The physical image is read back as complex numbers
    through ``e1 ~ 1``, ``e2 ~ i``; out-of-plane components count toward the
    residual.  Each part is measured relative to ``max(1, |value|)``.
    """
    x, y = lc_plane_basis(e1, e2)
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    z = c1.real * x + c1.imag * y
    w = c2.real * x + c2.imag * y
    Q, P4 = ks_arrays(z, w)
    P = P4[1:]
    Qc = complex(Q @ e1, Q @ e2)
    Pc = complex(P @ e1, P @ e2)
    Q_off = Q - Qc.real * e1 - Qc.imag * e2
    P_off = P - Pc.real * e1 - Pc.imag * e2
    Q_lc, P_lc = lc_map(c1, c2)
    res_q = (abs(Qc - Q_lc) + np.linalg.norm(Q_off)) / max(1.0, abs(Q_lc))
    res_p = (abs(Pc - P_lc) + np.linalg.norm(P_off) + abs(P4[0])) / max(1.0, abs(P_lc))
    return float(max(res_q, res_p))


def ks_ellipse_mass(s: KSState, m: KeplerMassParams, f: float) -> KeplerMassParams:
    """Kepler mass parameters whose orbit through ``ks_map(s)`` is the KS-ellipse."""
    ftilde = ks_hamiltonian(s, m, f)
    if m.mu * m.M + ftilde <= 0:
        raise DomainError(
            f"no bound KS-ellipse: mu M + ftilde = {m.mu * m.M + ftilde:g} <= 0")
    return KeplerMassParams(m.mu, m.M + ftilde / m.mu)


def ks_ellipse_elements(s: KSState, m: KeplerMassParams, f: float) -> DelaunayElements:
    """Elements of the physical ellipse traced by the K-flow through ``s``.

    It is the Kepler ellipse of ``ks_map(s)`` for the shifted mass
    ``M + ftilde / mu`` with ``ftilde = K(s)``.
    """
    return elements_from_state(ks_map(s), ks_ellipse_mass(s, m, f))


def kf_factor(s: KSState, m: KeplerMassParams, f: float) -> float:
    """Momentum scale sending the KS-ellipse onto the same ellipse for mass ``M``.

    Equals ``sqrt(M / (M + ftilde/mu))``; it is 1 exactly when ``ftilde = 0``.
    """
    shifted = ks_ellipse_mass(s, m, f)
    return math.sqrt(m.M / shifted.M)
