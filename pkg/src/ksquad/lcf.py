"""LCF action-angle coordinates of the regularized Kepler problem.

The planar chain runs on Levi-Civita pairs of complex numbers; the spatial chart
is read off the KS-ellipse of a regularized point.  Both satisfy
``K = Lc sqrt(2 f / mu) - mu M`` and ``omega = dLc ^ ddelta + dGc ^ dgamma (+ dHc ^ dzeta)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import ksreg, quat
from .errors import DomainError
from .kepler import (
    CartesianOrbitState,
    DelaunayElements,
    KeplerMassParams,
    elements_from_state,
    rotation_matrix,
    state_from_anomaly,
    wrap,
)
from .verify import bracket_matrix, darboux_pattern, fd_jacobian


class ChartError(DomainError):
    """A point lies outside the domain of a coordinate chart."""


@dataclass(frozen=True)
class PlanarLCF:
    Lc: float
    delta: float
    Gc: float
    gamma: float
    angles_defined: bool = True


@dataclass(frozen=True)
class SpatialLCF:
    Lc: float
    delta: float
    Gc: float
    gamma: float
    Hc: float
    zeta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.Lc, self.delta, self.Gc, self.gamma, self.Hc, self.zeta])


def _scale(mu0: float, f: float) -> float:
    if not (mu0 > 0 and f > 0):
        raise DomainError("need mu0 > 0 and f > 0")
    return (8.0 * mu0 * f) ** 0.25


def planar_lcf(z: complex, w: complex, mu0: float, M0: float, f: float) -> PlanarLCF:
    """Planar LCF coordinates of a Levi-Civita point ``(z, w)``.

    ``M0`` only enters the energy relation and is accepted for symmetry with
    the other charts.  When ``r_a`` or ``r_b`` vanishes the corresponding polar
    angle is undefined; it is then taken as 0 and ``angles_defined`` is False.
    """
    if z == 0 and w == 0:
        raise DomainError("planar LCF is undefined at (z, w) = (0, 0)")
    s = _scale(mu0, f)
    W = w / s
    Z = s * z
    Wp = (W + 1j * Z) / math.sqrt(2.0)
    Zp = (W.conjugate() + 1j * Z.conjugate()) / math.sqrt(2.0)
    ra = abs(Zp) ** 2 / 2.0
    rb = abs(Wp) ** 2 / 2.0
    defined = ra > 0 and rb > 0
    ta = cmath.phase(Zp) if ra > 0 else 0.0
    tb = cmath.phase(Wp) if rb > 0 else 0.0
    return PlanarLCF(
        Lc=(ra + rb) / 2.0, delta=wrap(ta + tb), Gc=(ra - rb) / 2.0,
        gamma=wrap(ta - tb + math.pi), angles_defined=defined,
    )


def planar_lcf_inverse(p: PlanarLCF, mu0: float, f: float) -> tuple[complex, complex]:
    """Levi-Civita point with the given planar LCF coordinates.

    The pair ``(theta_a, theta_b)`` is recovered modulo a common shift by
    ``pi``, which maps ``(z, w)`` to ``(-z, -w)``: the two LC preimages.
    """
    ra = p.Lc + p.Gc
    rb = p.Lc - p.Gc
    if ra < 0 or rb < 0:
        raise DomainError("need |Gc| <= Lc")
    ta = (p.delta + p.gamma - math.pi) / 2.0
    tb = (p.delta - p.gamma + math.pi) / 2.0
    Zp = math.sqrt(2.0 * ra) * cmath.exp(1j * ta)
    Wp = math.sqrt(2.0 * rb) * cmath.exp(1j * tb)
    W = (Wp + Zp.conjugate()) / math.sqrt(2.0)
    Z = (Wp - Zp.conjugate()) / (1j * math.sqrt(2.0))
    s = _scale(mu0, f)
    return Z / s, W * s


def planar_lcf_hamiltonian(p: PlanarLCF, mu0: float, M0: float, f: float) -> float:
    return p.Lc * math.sqrt(2.0 * f / mu0) - mu0 * M0


def planar_lcf_array(x, mu0: float, M0: float, f: float) -> np.ndarray:
    """``(Lc, delta, Gc, gamma)`` as a function of real coordinates ``(z1, z2, w1, w2)``."""
    p = planar_lcf(complex(x[0], x[1]), complex(x[2], x[3]), mu0, M0, f)
    return np.array([p.Lc, p.delta, p.Gc, p.gamma])


def planar_lcf_bracket_residual(z: complex, w: complex, mu0: float, M0: float, f: float
                                ) -> np.ndarray:
    """Bracket matrix of ``(Lc, delta, Gc, gamma)`` minus the Darboux pattern."""
    x = np.array([z.real, z.imag, w.real, w.imag])
    B = bracket_matrix(lambda y: planar_lcf_array(y, mu0, M0, f), x,
                       angular=[False, True, False, True])
    return B - darboux_pattern(2)


def k_f_map(P, Q, mu0: float, f: float, L: float):
    """``(P, Q) -> (P / (sqrt(2 mu0 f) L), Q)``."""
    if not (f > 0 and L > 0 and mu0 > 0):
        raise DomainError("k_f needs mu0 > 0, f > 0 and L > 0")
    P = np.asarray(P, dtype=float)
    return P / (math.sqrt(2.0 * mu0 * f) * L), np.asarray(Q, dtype=float)


def kf_image(s: ksreg.KSState, m: KeplerMassParams, f: float) -> CartesianOrbitState:
    """Physical state on the KS-ellipse of ``s`` with momentum rescaled to mass ``M``.

    The T-ellipse of the result (masses ``m``) is the KS-ellipse of ``s``.
    """
    c = ksreg.ks_map(s)
    return CartesianOrbitState(P=c.P * ksreg.kf_factor(s, m, f), Q=c.Q)


def _check_chart(el: DelaunayElements):
    if el.degenerate:
        raise ChartError("KS-ellipse is degenerate (zero angular momentum)")
    if el.circular:
        raise ChartError("KS-ellipse is circular")
    if el.horizontal:
        raise ChartError("KS-ellipse is horizontal (|H| = G)")


def spatial_lcf_from_state(s: ksreg.KSState, m: KeplerMassParams, f: float) -> SpatialLCF:
    """Spatial LCF coordinates of a regularized point."""
    el = ksreg.ks_ellipse_elements(s, m, f)
    _check_chart(el)
    mu = m.mu
    shifted_M = m.M + ksreg.ks_hamiltonian(s, m, f) / mu
    Lc = mu**1.5 * shifted_M / math.sqrt(2.0 * f)
    return SpatialLCF(Lc=Lc, delta=el.u, Gc=el.G, gamma=el.g, Hc=el.H, zeta=el.h)


def spatial_lcf_array(x, m: KeplerMassParams, f: float) -> np.ndarray:
    return spatial_lcf_from_state(ksreg.KSState(x[:4], x[4:]), m, f).as_array()


def state_from_spatial_lcf(c: SpatialLCF, m: KeplerMassParams, f: float,
                           theta: float = 0.0) -> ksreg.KSState:
    """Regularized point with the given LCF coordinates, on the fiber angle ``theta``."""
    shifted = KeplerMassParams(m.mu, math.sqrt(2.0 * f) * c.Lc / m.mu**1.5)
    a = m.mu * shifted.M / (2.0 * f)
    ratio = c.Gc**2 / (m.mu**2 * shifted.M * a)
    if not (0 < ratio < 1) or not abs(c.Hc) < c.Gc:
        raise ChartError("LCF actions outside the chart domain")
    e = math.sqrt(1.0 - ratio)
    inc = math.acos(c.Hc / c.Gc)
    phys = state_from_anomaly(a, e, inc, c.gamma, c.zeta, c.delta, shifted)
    return ksreg.ks_lift(phys, theta)


def lcf_darboux_residual(s: ksreg.KSState, m: KeplerMassParams, f: float) -> np.ndarray:
    """Bracket matrix of ``(Lc, delta, Gc, gamma, Hc, zeta)`` minus the Darboux pattern.

    Brackets are taken in the ambient ``(z, w)`` structure; the LCF functions are
    fiber invariant, so this equals the bracket on the reduced space.
    """
    spatial_lcf_from_state(s, m, f)
    x = np.concatenate([s.z, s.w])
    B = bracket_matrix(lambda y: spatial_lcf_array(y, m, f), x,
                       angular=[False, True, False, True, False, True])
    return B - darboux_pattern(3)


def delaunay_array(x, m: KeplerMassParams) -> np.ndarray:
    """``(L, l, G, g, H, h)`` of the physical point ``x = (Q, P)``."""
    el = elements_from_state(CartesianOrbitState(P=x[3:], Q=x[:3]), m)
    return np.array([el.L, el.l, el.G, el.g, el.H, el.h])


def delaunay_darboux_residual(c: CartesianOrbitState, m: KeplerMassParams) -> np.ndarray:
    """Bracket matrix of the spatial Delaunay coordinates minus the Darboux pattern."""
    el = elements_from_state(c, m)
    _check_chart(el)
    x = np.concatenate([c.Q, c.P])
    B = bracket_matrix(lambda y: delaunay_array(y, m), x,
                       angular=[False, True, False, True, False, True])
    return B - darboux_pattern(3)


def _rotated(xe, I: float, h: float):
    """``R3(h) R1(I)`` applied to ``(x1, x2, 0)`` and ``(y1, y2, 0)``."""
    R = rotation_matrix(I, 0.0, h)
    return R @ np.array([xe[0], xe[1], 0.0]), R @ np.array([xe[2], xe[3], 0.0])


def rotation_lemma_jacobians(xe) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic differentials on the extended space ``(x1, x2, y1, y2, I, h)``.

    Returns ``(Dx', Dy', dH)`` with ``H = x'1 y'2 - x'2 y'1``.
    """
    x1, x2, y1, y2, I, h = xe
    cI, sI, ch, sh = math.cos(I), math.sin(I), math.cos(h), math.sin(h)
    R = rotation_matrix(I, 0.0, h)
    dR_dI = np.array([[0.0, sh * sI, sh * cI], [0.0, -ch * sI, -ch * cI], [0.0, cI, -sI]])
    dR_dh = np.array([[-sh, -ch * cI, ch * sI], [ch, -sh * cI, sh * sI], [0.0, 0.0, 0.0]])
    xv = np.array([x1, x2, 0.0])
    yv = np.array([y1, y2, 0.0])
    Dx = np.zeros((3, 6))
    Dy = np.zeros((3, 6))
    Dx[:, 0:2] = R[:, 0:2]
    Dy[:, 2:4] = R[:, 0:2]
    Dx[:, 4] = dR_dI @ xv
    Dy[:, 4] = dR_dI @ yv
    Dx[:, 5] = dR_dh @ xv
    Dy[:, 5] = dR_dh @ yv
    # H = (x1 y2 - x2 y1) cos I.
    m = x1 * y2 - x2 * y1
    dH = np.array([y2 * cI, -y1 * cI, -x2 * cI, x1 * cI, -m * sI, 0.0])
    return Dx, Dy, dH


def rotation_two_form_residual(x1: float, x2: float, y1: float, y2: float, I: float, h: float,
                               u, v) -> float:
    """``sum dy'^dx' - (dy1^dx1 + dy2^dx2 + dH^dh)`` on tangent vectors ``u, v``.

    Tangent vectors live on the extended space ``(x1, x2, y1, y2, I, h)``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    Dx, Dy, dH = rotation_lemma_jacobians((x1, x2, y1, y2, I, h))
    # Paired per component so the identity rotation cancels exactly.
    lhs = float(np.sum((Dy @ u) * (Dx @ v) - (Dy @ v) * (Dx @ u)))
    base = (u[2] * v[0] - v[2] * u[0]) + (u[3] * v[1] - v[3] * u[1])
    rot = float(dH @ u) * v[5] - float(dH @ v) * u[5]
    return lhs - (base + rot)


def hopf_plane_residual(e1, e2, c: complex) -> float:
    """Distance from ``hopf`` of an LC-plane point to ``span(e1, e2)``."""
    x, y = ksreg.lc_plane_basis(e1, e2)
    v = quat.hopf(c.real * x + c.imag * y)
    e1 = np.asarray(e1, float)
    e2 = np.asarray(e2, float)
    return float(np.linalg.norm(v - (v @ e1) * e1 - (v @ e2) * e2))


def lcf_jacobian_fd(s: ksreg.KSState, m: KeplerMassParams, f: float) -> np.ndarray:
    x = np.concatenate([s.z, s.w])
    return fd_jacobian(lambda y: spatial_lcf_array(y, m, f), x,
                       [False, True, False, True, False, True])
