"""The bound spatial Kepler problem.

Hamiltonian ``T(P, Q) = |P|^2 / (2 mu) - mu M / |Q|`` (gravitational constant 1),
orbital elements, the Delaunay chart ``(L, l, G, g, H, h)`` and Kepler's
equation.  Angular momentum is ``Q x P``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError

TWO_PI = 2.0 * math.pi

# Chart-boundary thresholds (relative).
DEGENERATE_TOL = 1e-9
CIRCULAR_TOL = 1e-9
HORIZONTAL_TOL = 1e-9

KEPLER_TOL = 1e-13


@dataclass(frozen=True)
class KeplerMassParams:
    """Reduced mass ``mu`` and gravitational mass ``M``."""

    mu: float
    M: float

    def __post_init__(self):
        if not (self.mu > 0 and self.M > 0):
            raise DomainError(f"mass parameters must be positive, got mu={self.mu}, M={self.M}")


@dataclass(frozen=True)
class CartesianOrbitState:
    P: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "P", np.asarray(self.P, dtype=float))
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))

    @property
    def angular_momentum(self) -> np.ndarray:
        return np.cross(self.Q, self.P)


@dataclass(frozen=True)
class DelaunayElements:
    """Delaunay actions/angles plus the derived classical elements.

    Where the chart degenerates the affected angles are reported as 0 and a
    flag is raised: ``horizontal`` (node undefined, ``h = 0`` and ``g`` is
    measured from the x axis), ``circular`` (pericenter undefined, ``g = 0``
    and ``u = l`` is measured from the node) and ``degenerate`` (zero angular
    momentum, orbital plane undefined).
    """

    L: float
    l: float
    G: float
    g: float
    H: float
    h: float
    a: float
    e: float
    inc: float
    u: float
    degenerate: bool = False
    circular: bool = False
    horizontal: bool = False

    @property
    def flagged(self) -> bool:
        return self.degenerate or self.circular or self.horizontal


def wrap(angle):
    """Reduce angles to ``[0, 2 pi)``."""
    out = np.mod(angle, TWO_PI)
    # np.mod can return exactly 2 pi for tiny negative inputs.
    out = np.where(out >= TWO_PI, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def angle_diff(a, b):
    """``a - b`` reduced to ``(-pi, pi]``."""
    d = np.mod(np.asarray(a) - np.asarray(b) + math.pi, TWO_PI) - math.pi
    return float(d) if np.ndim(d) == 0 else d


def solve_kepler(l, e):
    """Eccentric anomaly ``u`` with ``u - e sin u = l``.

    Newton's method from ``u0 = l + e sin l``; entries still unconverged after
    50 iterations are finished by bisection on ``[l - e, l + e]``.  The branch
    of ``l`` is kept, so ``u(l + 2 pi) = u(l) + 2 pi``.  Works elementwise on
    arrays.
    """
    e_arr = np.asarray(e, dtype=float)
    if np.any(e_arr < 0) or np.any(e_arr >= 1):
        raise DomainError("solve_kepler needs 0 <= e < 1")
    l_arr = np.asarray(l, dtype=float)
    l_arr, e_arr = np.broadcast_arrays(l_arr, e_arr)
    base = np.floor(l_arr / TWO_PI) * TWO_PI
    m = l_arr - base
    u = m + e_arr * np.sin(m)
    done = np.zeros(m.shape, dtype=bool)
    for _ in range(50):
        f = u - e_arr * np.sin(u) - m
        done = np.abs(f) <= KEPLER_TOL
        if np.all(done):
            break
        fp = 1.0 - e_arr * np.cos(u)
        u = np.where(done, u, u - f / fp)
    f = u - e_arr * np.sin(u) - m
    bad = np.abs(f) > KEPLER_TOL
    if np.any(bad):
        lo = np.where(bad, m - e_arr, u)
        hi = np.where(bad, m + e_arr, u)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = mid - e_arr * np.sin(mid) - m
            lo = np.where(fm < 0, mid, lo)
            hi = np.where(fm < 0, hi, mid)
            if np.all(hi - lo < 1e-15 * np.maximum(1.0, np.abs(mid))):
                break
        u = np.where(bad, 0.5 * (lo + hi), u)
        if np.any(np.abs(u - e_arr * np.sin(u) - m) > 10 * KEPLER_TOL):
            raise ConvergenceError("Kepler equation did not converge")
    u = u + base
    return float(u) if np.ndim(u) == 0 else u


def kepler_energy(s: CartesianOrbitState, m: KeplerMassParams) -> float:
    r = float(np.linalg.norm(s.Q))
    if r == 0.0:
        raise DomainError("Kepler energy is undefined at collision (Q = 0)")
    return float(s.P @ s.P) / (2.0 * m.mu) - m.mu * m.M / r


def energy_from_L(L: float, m: KeplerMassParams) -> float:
    """Energy ``-mu^3 M^2 / (2 L^2)`` of a bound orbit with Delaunay action ``L``."""
    return -(m.mu**3) * m.M**2 / (2.0 * L * L)


def delaunay_L(a: float, m: KeplerMassParams) -> float:
    return m.mu * math.sqrt(m.M * a)


def semi_major_axis(L: float, m: KeplerMassParams) -> float:
    return (L / (m.mu * math.sqrt(m.M))) ** 2


def elements_from_state(s: CartesianOrbitState, m: KeplerMassParams) -> DelaunayElements:
    """Delaunay and classical elements of a bound state."""
    Q, P = s.Q, s.P
    r = float(np.linalg.norm(Q))
    E = kepler_energy(s, m)
    if E >= 0:
        raise DomainError(f"orbit is not bound (energy {E:g} >= 0)")
    gm = m.M
    a = -m.mu * m.M / (2.0 * E)
    L = m.mu * math.sqrt(m.M * a)
    C = np.cross(Q, P)
    G = float(np.linalg.norm(C))
    H = float(C[2])
    e = math.sqrt(max(0.0, 1.0 - (G / L) ** 2))
    degenerate = G < DEGENERATE_TOL * L
    circular = (L - G) < CIRCULAR_TOL * L
    horizontal = (not degenerate) and (G - abs(H)) < HORIZONTAL_TOL * G
    v = P / m.mu
    rdotv = float(Q @ v)
    # e cos u and e sin u are well defined for every e, including radial orbits.
    ecosu = 1.0 - r / a
    esinu = rdotv / math.sqrt(gm * a)

    if degenerate:
        return DelaunayElements(
            L=L, l=wrap(math.atan2(esinu, ecosu) - esinu), G=G, g=0.0, H=H, h=0.0,
            a=a, e=e, inc=0.0, u=wrap(math.atan2(esinu, ecosu)),
            degenerate=True, circular=False, horizontal=False,
        )

    c_hat = C / G
    inc = math.acos(min(1.0, max(-1.0, H / G)))
    if horizontal:
        h = 0.0
    else:
        h = math.atan2(C[0], -C[1])
    n_hat = np.array([math.cos(h), math.sin(h), 0.0])
    m_hat = np.cross(c_hat, n_hat)
    if circular:
        g = 0.0
        u = math.atan2(float(Q @ m_hat), float(Q @ n_hat))
    else:
        h_spec = C / m.mu
        evec = np.cross(v, h_spec) / gm - Q / r
        g = math.atan2(float(evec @ m_hat), float(evec @ n_hat))
        u = math.atan2(esinu, ecosu)
    l = u - e * math.sin(u)
    return DelaunayElements(
        L=L, l=wrap(l), G=G, g=wrap(g), H=H, h=wrap(h), a=a, e=e, inc=inc, u=wrap(u),
        degenerate=False, circular=circular, horizontal=horizontal,
    )


def rotation_matrix(inc: float, g: float, h: float) -> np.ndarray:
    """``R3(h) R1(inc) R3(g)``: perifocal frame to the reference frame."""
    ch, sh = math.cos(h), math.sin(h)
    ci, si = math.cos(inc), math.sin(inc)
    cg, sg = math.cos(g), math.sin(g)
    r3h = np.array([[ch, -sh, 0.0], [sh, ch, 0.0], [0.0, 0.0, 1.0]])
    r1i = np.array([[1.0, 0.0, 0.0], [0.0, ci, -si], [0.0, si, ci]])
    r3g = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
    return r3h @ r1i @ r3g


def perifocal_position(a, e, u):
    """Position in the perifocal frame, vectorized over ``u``; shape ``(..., 3)``."""
    u = np.asarray(u, dtype=float)
    b = a * math.sqrt(max(0.0, 1.0 - e * e))
    return np.stack([a * (np.cos(u) - e), b * np.sin(u), np.zeros_like(u)], axis=-1)


def state_from_anomaly(a: float, e: float, inc: float, g: float, h: float, u: float,
                       m: KeplerMassParams) -> CartesianOrbitState:
    """Cartesian state on the ellipse ``(a, e, inc, g, h)`` at eccentric anomaly ``u``."""
    if not (a > 0 and 0 <= e < 1):
        raise DomainError(f"need a > 0 and 0 <= e < 1, got a={a}, e={e}")
    R = rotation_matrix(inc, g, h)
    n = math.sqrt(m.M / a**3)
    cu, su = math.cos(u), math.sin(u)
    sq = math.sqrt(1.0 - e * e)
    q_pf = np.array([a * (cu - e), a * sq * su, 0.0])
    speed = a * n / (1.0 - e * cu)
    v_pf = speed * np.array([-su, sq * cu, 0.0])
    return CartesianOrbitState(P=m.mu * (R @ v_pf), Q=R @ q_pf)


def delaunay_from_actions(L: float, l: float, G: float, g: float, H: float, h: float,
                          m: KeplerMassParams) -> DelaunayElements:
    """Fill in the derived elements of a Delaunay point; ``u`` solves Kepler's equation."""
    if not (0 < G <= L * (1 + 1e-15)) or abs(H) > G * (1 + 1e-15):
        raise DomainError(f"invalid Delaunay actions L={L}, G={G}, H={H}")
    a = semi_major_axis(L, m)
    e = math.sqrt(max(0.0, 1.0 - (G / L) ** 2))
    inc = math.acos(min(1.0, max(-1.0, H / G)))
    u = solve_kepler(wrap(l), e)
    return DelaunayElements(
        L=L, l=wrap(l), G=G, g=wrap(g), H=H, h=wrap(h), a=a, e=e, inc=inc, u=wrap(u),
        degenerate=G < DEGENERATE_TOL * L,
        circular=(L - G) < CIRCULAR_TOL * L,
        horizontal=(G - abs(H)) < HORIZONTAL_TOL * G,
    )


def state_from_elements(el: DelaunayElements, m: KeplerMassParams) -> CartesianOrbitState:
    """Inverse of :func:`elements_from_state` (the mean anomaly ``l`` is authoritative)."""
    if el.degenerate:
        raise DomainError("cannot build a state from a degenerate (G = 0) element set")
    a = semi_major_axis(el.L, m)
    e = math.sqrt(max(0.0, 1.0 - (el.G / el.L) ** 2))
    inc = math.acos(min(1.0, max(-1.0, el.H / el.G)))
    u = solve_kepler(el.l, e)
    return state_from_anomaly(a, e, inc, el.g, el.h, u, m)


def positions_on_orbit(el: DelaunayElements, mean_anomalies) -> np.ndarray:
    """Positions at an array of mean anomalies (masses only enter through ``a``)."""
    u = solve_kepler(np.asarray(mean_anomalies, dtype=float), el.e)
    R = rotation_matrix(el.inc, el.g, el.h)
    return perifocal_position(el.a, el.e, u) @ R.T
