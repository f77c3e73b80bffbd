"""Secular averaging and the quadrupolar Hamiltonians of the lunar three-body problem.

Closed form in the reduced Delaunay chart (total angular momentum ``C`` vertical,
nodes eliminated)::

    F_quad = -(mu1 m2) L2^3 / (8 a1 G2^3) * B
    B = 3 x (1 + X) + 15 (1 - x)(cos^2 g1 + sin^2 g1 X) - 6 (1 - x) - 4

with ``x = G1^2/L1^2`` and ``X = cos^2 Delta = D^2 / (4 G1^2 G2^2)``,
``D = C^2 - G1^2 - G2^2``.  The same expression written in the Laplace chart
``(e1, g1, Delta, e2)`` and in Pauli-Souriau coordinates is provided for
cross-checks, together with the numerical averages that adjudicate between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from . import ksreg
from .errors import DomainError
from .kepler import (
    CartesianOrbitState,
    DelaunayElements,
    KeplerMassParams,
    angle_diff,
    delaunay_from_actions,
    elements_from_state,
    perifocal_position,
    positions_on_orbit,
    rotation_matrix,
    solve_kepler,
    state_from_elements,
)
from .lcf import SpatialLCF, kf_image, spatial_lcf_from_state, state_from_spatial_lcf
from .threebody import ThreeBodyMasses
from .verify import Hamiltonian, midpoint_step, symplectic_integrate

TWO_PI = 2.0 * math.pi
TRIANGLE_TOL = 1e-12


@dataclass(frozen=True)
class QuadChartPoint:
    """Reduced secular point ``(G1, g1, G2, g2)`` with its constants of motion.

    ``L1, L2`` are the Delaunay semi-major-axis actions, ``C`` the norm of the
    total angular momentum and ``a1`` the inner semi-major axis entering the
    prefactor.
    """

    L1: float
    G1: float
    g1: float
    G2: float
    g2: float
    C: float
    L2: float
    a1: float
    alpha: float | None = None

    def cos_delta(self) -> float:
        return (self.C**2 - self.G1**2 - self.G2**2) / (2.0 * self.G1 * self.G2)


@dataclass(frozen=True)
class LaplaceChartPoint:
    """Inner ``(e1, g1)``, mutual inclination ``Delta`` and outer ``e2``."""

    e1: float
    g1: float
    Delta: float
    e2: float
    a1: float


@dataclass(frozen=True)
class PauliSouriauPoint:
    """Two points ``A, B`` on the sphere of radius ``sqrt(L1)`` and the outer normal ``N``."""

    A: np.ndarray
    B: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        N = np.asarray(self.N, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "N", N)
        if abs(A @ A - B @ B) > 1e-12 * max(1.0, float(A @ A)):
            raise DomainError("|A| and |B| must agree")
        if abs(np.linalg.norm(N) - 1.0) > 1e-12:
            raise DomainError("N must be a unit vector")

    @property
    def L1(self) -> float:
        return float(self.A @ self.A)


@dataclass(frozen=True)
class OuterParams:
    """Prefactor data ``mu1 m2 / (8 a1 (1 - e2^2)^{3/2})`` of the Laplace-chart forms."""

    mu1: float
    m2: float
    a1: float
    e2: float


# --- closed form in the reduced Delaunay chart -------------------------------------------


def _triangle_check(G1: float, G2: float, C: float):
    scale = max(1.0, G1 + G2)
    if C < abs(G1 - G2) - TRIANGLE_TOL * scale or C > G1 + G2 + TRIANGLE_TOL * scale:
        raise DomainError(f"triangle inequality violated: G1={G1}, G2={G2}, C={C}")


def _validate(q: QuadChartPoint):
    if not q.G2 > 0:
        raise DomainError("F_quad needs a non-degenerate outer ellipse (G2 > 0)")
    if q.G1 < 0 or q.G1 > q.L1 * (1 + 1e-12):
        raise DomainError("need 0 <= G1 <= L1")
    _triangle_check(q.G1, q.G2, q.C)


def braces(x: float, g1: float, X: float) -> float:
    """The bracketed factor ``B(x, g1, X)``."""
    c2, s2 = math.cos(g1) ** 2, math.sin(g1) ** 2
    return 3 * x * (1 + X) + 15 * (1 - x) * (c2 + s2 * X) - 6 * (1 - x) - 4


def _x_X(q: QuadChartPoint) -> tuple[float, float, float]:
    """``(x, 3 x (1 + X), X)`` with the degenerate limit at ``G1 = 0``."""
    x = (q.G1 / q.L1) ** 2
    D = q.C**2 - q.G1**2 - q.G2**2
    if q.G1 == 0.0:
        # x X -> D^2 / (4 L1^2 G2^2); X itself stays bounded and is multiplied by
        # (1 - x) sin^2 g1, whose limit needs X -> 0, forced by C = G2.
        return 0.0, 3 * D**2 / (4 * q.L1**2 * q.G2**2), 0.0
    X = D**2 / (4 * q.G1**2 * q.G2**2)
    return x, 3 * x * (1 + X), X


def prefactor(q: QuadChartPoint, masses: ThreeBodyMasses) -> float:
    return -(masses.mu1 * masses.m2) * q.L2**3 / (8 * q.a1 * q.G2**3)


def f_quad_braces(q: QuadChartPoint) -> float:
    _validate(q)
    x, term1, X = _x_X(q)
    c2, s2 = math.cos(q.g1) ** 2, math.sin(q.g1) ** 2
    return term1 + 15 * (1 - x) * (c2 + s2 * X) - 6 * (1 - x) - 4


def f_quad(q: QuadChartPoint, masses: ThreeBodyMasses) -> float:
    """Reduced quadrupolar Hamiltonian; the analytic extension is used at ``G1 = 0``."""
    braces = f_quad_braces(q)
    return prefactor(q, masses) * braces


def f_quad_gradient(q: QuadChartPoint, masses: ThreeBodyMasses) -> dict[str, float]:
    """Analytic partials ``dF/dG1, dF/dg1, dF/dG2, dF/dg2`` (the last is 0)."""
    _validate(q)
    if q.G1 <= 0:
        raise DomainError("partials are taken at G1 > 0")
    G1, G2, L1, C, g = q.G1, q.G2, q.L1, q.C, q.g1
    pref = prefactor(q, masses)
    x = (G1 / L1) ** 2
    D = C**2 - G1**2 - G2**2
    X = D**2 / (4 * G1**2 * G2**2)
    c2, s2 = math.cos(g) ** 2, math.sin(g) ** 2
    B = 3 * x * (1 + X) + 15 * (1 - x) * (c2 + s2 * X) - 6 * (1 - x) - 4
    B_x = 3 * (1 + X) - 15 * (c2 + s2 * X) + 6
    B_X = 3 * x + 15 * (1 - x) * s2
    B_g = 15 * (1 - x) * math.sin(2 * g) * (X - 1)
    X_G1 = -D / (G1 * G2**2) - D**2 / (2 * G1**3 * G2**2)
    X_G2 = -D / (G1**2 * G2) - D**2 / (2 * G1**2 * G2**3)
    return {
        "G1": pref * (B_x * 2 * G1 / L1**2 + B_X * X_G1),
        "g1": pref * B_g,
        "G2": -3 * pref / G2 * B + pref * B_X * X_G2,
        "g2": 0.0,
    }


def quad_point(masses: ThreeBodyMasses, a1: float, e1: float, g1: float, a2: float,
               e2: float, g2: float, Delta: float) -> QuadChartPoint:
    """Reduced chart point from classical elements and the mutual inclination."""
    L1 = masses.mu1 * math.sqrt(masses.M1 * a1)
    L2 = masses.mu2 * math.sqrt(masses.M2 * a2)
    G1 = L1 * math.sqrt(1 - e1 * e1)
    G2 = L2 * math.sqrt(1 - e2 * e2)
    C = math.sqrt(max(0.0, G1 * G1 + G2 * G2 + 2 * G1 * G2 * math.cos(Delta)))
    return QuadChartPoint(L1=L1, G1=G1, g1=g1, G2=G2, g2=g2, C=C, L2=L2, a1=a1,
                          alpha=a1 / a2)


def inner_semi_major_axis(L1: float, masses: ThreeBodyMasses) -> float:
    return (L1 / masses.mu1) ** 2 / masses.M1


def laplace_from_quad(q: QuadChartPoint) -> LaplaceChartPoint:
    cd = min(1.0, max(-1.0, q.cos_delta()))
    return LaplaceChartPoint(
        e1=math.sqrt(max(0.0, 1 - (q.G1 / q.L1) ** 2)), g1=q.g1, Delta=math.acos(cd),
        e2=math.sqrt(max(0.0, 1 - (q.G2 / q.L2) ** 2)), a1=q.a1,
    )


# --- Laplace-plane chart ----------------------------------------------------------------


def _laplace_prefactor(a1: float, e2: float, mu1: float, m2: float) -> float:
    if not 0 <= e2 < 1:
        raise DomainError("need 0 <= e2 < 1")
    return -(mu1 * m2) / (8 * a1 * (1 - e2 * e2) ** 1.5)


def f_quad_laplace(p: LaplaceChartPoint, mu1: float, m2: float) -> float:
    """``-(mu1 m2)/(8 a1 (1-e2^2)^{3/2}) [-(3(1-e1^2) + 15 sin^2 g1) sin^2 Delta + 12(1-e1^2) + 5]``."""
    pref = _laplace_prefactor(p.a1, p.e2, mu1, m2)
    s2d = math.sin(p.Delta) ** 2
    w = 1 - p.e1**2
    return pref * (-(3 * w + 15 * math.sin(p.g1) ** 2) * s2d + 12 * w + 5)


def f_quad_laplace_expanded(p: LaplaceChartPoint, mu1: float, m2: float) -> float:
    """``... [3(1-e1^2)(1+cos^2 Delta) + 15(cos^2 g1 + cos^2 Delta sin^2 g1) - 6 e1^2 - 4]``."""
    pref = _laplace_prefactor(p.a1, p.e2, mu1, m2)
    c2d = math.cos(p.Delta) ** 2
    return pref * (3 * (1 - p.e1**2) * (1 + c2d)
                   + 15 * (math.cos(p.g1) ** 2 + c2d * math.sin(p.g1) ** 2)
                   - 6 * p.e1**2 - 4)


def f_quad_laplace_corrected(p: LaplaceChartPoint, mu1: float, m2: float) -> float:
    """Laplace-chart form of :func:`f_quad`: ``2 + 3 e^2 - 3 sin^2 Delta (1 - e^2 + 5 e^2 sin^2 g1)``."""
    pref = _laplace_prefactor(p.a1, p.e2, mu1, m2)
    e2_ = p.e1**2
    s2d = math.sin(p.Delta) ** 2
    return pref * (2 + 3 * e2_ - 3 * s2d * (1 - e2_ + 5 * e2_ * math.sin(p.g1) ** 2))


# --- Pauli-Souriau coordinates ----------------------------------------------------------

# Resolved normalization of the (1 - e1^2) sin^2 Delta expression: c * L1^power.
PS_CONSTANT = 0.25
PS_POWER = -1


def pauli_souriau_point(G_vec, e_vec, L1: float, N) -> PauliSouriauPoint:
    """``A = (G - L1 e)/sqrt(L1)``, ``B = (-G - L1 e)/sqrt(L1)``."""
    G_vec = np.asarray(G_vec, dtype=float)
    e_vec = np.asarray(e_vec, dtype=float)
    r = math.sqrt(L1)
    return PauliSouriauPoint((G_vec - L1 * e_vec) / r, (-G_vec - L1 * e_vec) / r, N)


def ps_bracket(p: PauliSouriauPoint) -> float:
    """``|A - B|^2 - ((A - B) . N)^2``."""
    d = p.A - p.B
    return float(d @ d - (d @ p.N) ** 2)


def ps_bracket_literal(p: PauliSouriauPoint, constant: float = 0.25, power: int = -2) -> float:
    """Grouping that scales only the first squared component."""
    d = p.A - p.B
    return float(constant * p.L1**power * d[0] ** 2 + d[1] ** 2 + d[2] ** 2 - (d @ p.N) ** 2)


def ps_one_minus_e2_sin2(p: PauliSouriauPoint, constant: float = PS_CONSTANT,
                         power: int = PS_POWER) -> float:
    """``(1 - e1^2) sin^2 Delta`` as ``constant * L1^power * ps_bracket``."""
    return constant * p.L1**power * ps_bracket(p)


def ps_sin2g_sin2(p: PauliSouriauPoint) -> float:
    """``sin^2 g1 sin^2 Delta = ((A + B) . N)^2 / |A + B|^2``."""
    s = p.A + p.B
    n2 = float(s @ s)
    if n2 <= 1e-24 * max(1.0, p.L1):
        raise DomainError("|A + B| = 0: circular inner orbit, g1 undefined")
    return float((s @ p.N) ** 2 / n2)


def ps_one_minus_e2(p: PauliSouriauPoint) -> float:
    d = p.A - p.B
    return float(d @ d) / (4 * p.L1)


def f_quad_pauli_souriau(p: PauliSouriauPoint, aux: OuterParams, form: str = "ratio"
                         ) -> float:
    """F_quad assembled in Pauli-Souriau coordinates.

    ``form="ratio"`` substitutes the two extension expressions into the
    Laplace-chart bracket of :func:`f_quad_laplace`; it is singular where
    ``A + B = 0``.  ``form="polynomial"`` assembles the bracket of :func:`f_quad`,
    which is polynomial in ``(A, B, N)``: there ``e^2 sin^2 g1 sin^2 Delta``
    equals ``((A + B) . N)^2 / (4 L1)``.
    """
    pref = _laplace_prefactor(aux.a1, aux.e2, aux.mu1, aux.m2)
    T1 = ps_one_minus_e2_sin2(p)
    w = ps_one_minus_e2(p)
    if form == "ratio":
        T2 = ps_sin2g_sin2(p)
        return pref * (-(3 * T1 + 15 * T2) + 12 * w + 5)
    if form == "polynomial":
        s = p.A + p.B
        e2Y = float((s @ p.N) ** 2) / (4 * p.L1)
        return pref * (2 + 3 * (1 - w) - 3 * T1 - 15 * e2Y)
    raise ValueError(f"unknown form {form!r}")


def pericenter_projection_ratio(p_vec, N) -> float:
    """``|p - p1|^2 / |p|^2`` with ``p1`` the projection of ``p`` on the plane normal to ``N``."""
    p_vec = np.asarray(p_vec, dtype=float)
    N = np.asarray(N, dtype=float)
    p1 = p_vec - (p_vec @ N) * N
    d = p_vec - p1
    return float(d @ d / (p_vec @ p_vec))


# --- configurations in the Laplace frame ------------------------------------------------


def inner_kepler(masses: ThreeBodyMasses) -> KeplerMassParams:
    return KeplerMassParams(masses.mu1, masses.M1)


def outer_kepler(masses: ThreeBodyMasses) -> KeplerMassParams:
    return KeplerMassParams(masses.mu2, masses.M2)


def node_actions(G1: float, G2: float, C: float) -> tuple[float, float]:
    """``(H1, H2)`` with ``C`` vertical, ``H1 + H2 = C`` and ``h1 = h2 + pi``."""
    if not C > 0:
        raise DomainError("elimination of the nodes needs C > 0")
    H1 = (C * C + G1 * G1 - G2 * G2) / (2 * C)
    return H1, C - H1


def configuration_from_quad_chart(q: QuadChartPoint, masses: ThreeBodyMasses,
                                  l1: float = 0.0, l2: float = 0.0
                                  ) -> tuple[DelaunayElements, DelaunayElements]:
    """Inner and outer Delaunay elements in the Laplace frame (``h2 = 0``, ``h1 = pi``)."""
    _validate(q)
    H1, H2 = node_actions(q.G1, q.G2, q.C)
    el1 = delaunay_from_actions(q.L1, l1, q.G1, q.g1, H1, math.pi, inner_kepler(masses))
    el2 = delaunay_from_actions(q.L2, l2, q.G2, q.g2, H2, 0.0, outer_kepler(masses))
    return el1, el2


def mutual_node_angle(G_vec, e_vec, G_other) -> float:
    """Argument of pericenter measured from the mutual node with another orbit."""
    G_vec = np.asarray(G_vec, dtype=float)
    c_hat = G_vec / np.linalg.norm(G_vec)
    n = np.cross(np.asarray(G_other, dtype=float), G_vec)
    nn = np.linalg.norm(n)
    if nn == 0.0:
        raise DomainError("coplanar orbits: mutual node undefined")
    n /= nn
    return math.atan2(float(e_vec @ np.cross(c_hat, n)), float(e_vec @ n))


def eccentricity_vector(c: CartesianOrbitState, m: KeplerMassParams) -> np.ndarray:
    r = float(np.linalg.norm(c.Q))
    v = c.P / m.mu
    h = np.cross(c.Q, v)
    return np.cross(v, h) / m.M - c.Q / r


# --- numerical averages ---------------------------------------------------------------


def _pert_grid(Q1, Q2, masses: ThreeBodyMasses) -> np.ndarray:
    """``F_pert`` on all pairs ``(Q1[i], Q2[j])``; shapes ``(n1, 3)`` and ``(n2, 3)``."""
    s0, s1 = masses.sigma0, masses.sigma1
    a = Q1[:, None, :]
    b = Q2[None, :, :]
    rx = np.linalg.norm(b - s0 * a, axis=-1)
    ry = np.linalg.norm(b + s1 * a, axis=-1)
    r2 = np.linalg.norm(b, axis=-1)
    return -masses.mu1 * masses.m2 * ((1 / rx - 1 / r2) / s0 + (1 / ry - 1 / r2) / s1)


def _grid(n: int, phase: float = 0.0) -> np.ndarray:
    return phase + TWO_PI * np.arange(n) / n


def _mean(vals) -> float:
    vals = np.ascontiguousarray(vals, dtype=float).ravel()
    return float(np.sum(vals) / vals.size)


def _check_separated(el1: DelaunayElements, el2: DelaunayElements):
    if not el2.a * (1 - el2.e) > el1.a * (1 + el1.e):
        raise DomainError("inner and outer orbits are not separated")


def average_pert_numeric(el1: DelaunayElements, el2: DelaunayElements, masses: ThreeBodyMasses,
                         n: int = 64, phase1: float = 0.0, phase2: float = 0.0) -> float:
    """``(1/4 pi^2) int F_pert dl1 dl2`` by the rectangle rule on an ``n x n`` grid."""
    _check_separated(el1, el2)
    Q1 = positions_on_orbit(el1, _grid(n, phase1))
    Q2 = positions_on_orbit(el2, _grid(n, phase2))
    return _mean(_pert_grid(Q1, Q2, masses))


def quad_integral_numeric(el1: DelaunayElements, el2: DelaunayElements,
                          masses: ThreeBodyMasses, n: int = 64) -> dict[str, float]:
    """Quadrupole-truncated average in both normalizations, divided by ``alpha^3``.

    ``"mean"`` is ``-(mu1 m2 / 2) <|Q1|^2 / |Q2|^3 (3 cos^2 zeta - 1)> / alpha^3``
    with ``cos zeta`` the cosine of the angle between ``Q1`` and ``Q2``.
    ``"as_typeset"`` uses the opposite sign and the unnormalized integral.
    """
    Q1 = positions_on_orbit(el1, _grid(n))
    Q2 = positions_on_orbit(el2, _grid(n))
    r1 = np.linalg.norm(Q1, axis=-1)[:, None]
    r2 = np.linalg.norm(Q2, axis=-1)[None, :]
    cz = (Q1 @ Q2.T) / (r1 * r2)
    avg = _mean(r1**2 / r2**3 * (3 * cz**2 - 1))
    alpha = el1.a / el2.a
    scale = masses.mu1 * masses.m2 / (2 * alpha**3)
    return {"mean": -scale * avg, "as_typeset": scale * avg * 4 * math.pi**2}


def expansion_remainder(q: QuadChartPoint, masses: ThreeBodyMasses, n: int = 64) -> float:
    """``R(alpha) = |F_sec / alpha^3 - F_quad| / |F_quad|`` at ``q``."""
    el1, el2 = configuration_from_quad_chart(q, masses)
    alpha = el1.a / el2.a
    avg = average_pert_numeric(el1, el2, masses, n)
    fq = f_quad(replace(q, a1=el1.a), masses)
    return abs(avg / alpha**3 - fq) / abs(fq)


def sweep_point(masses: ThreeBodyMasses, alpha: float, a1: float = 1.0, e1: float = 0.6,
                g1: float = 1.0, e2: float = 0.4, g2: float = 0.5, Delta: float = 1.0
                ) -> QuadChartPoint:
    return quad_point(masses, a1, e1, g1, a1 / alpha, e2, g2, Delta)


def adjudicate_chart(masses: ThreeBodyMasses, alpha: float = 0.005, n: int = 64,
                     **config) -> dict:
    """Compare the averaged ``F_pert / alpha^3`` with both closed-form charts.

    Returns the relative residual of each and the supported chart.
    """
    q = sweep_point(masses, alpha, **config)
    el1, el2 = configuration_from_quad_chart(q, masses)
    avg = average_pert_numeric(el1, el2, masses, n) / alpha**3
    qq = replace(q, a1=el1.a)
    lp = laplace_from_quad(qq)
    delaunay = f_quad(qq, masses)
    expanded = f_quad_laplace_expanded(lp, masses.mu1, masses.m2)
    form2 = f_quad_laplace(lp, masses.mu1, masses.m2)
    res_delaunay = abs(avg - delaunay) / abs(avg)
    res_expanded = abs(avg - expanded) / abs(avg)
    return {
        "alpha": alpha,
        "nodes": n,
        "averaged": avg,
        "delaunay_form": delaunay,
        "laplace_expanded": expanded,
        "laplace_form": form2,
        "residual_delaunay_form": res_delaunay,
        "residual_laplace_expanded": res_expanded,
        "supported": "delaunay_form" if res_delaunay < res_expanded else "laplace_expanded",
    }


def adjudicate_ps_normalization(n_samples: int = 40, seed: int = 0) -> dict:
    """Fit ``c L1^p`` in ``(1 - e1^2) sin^2 Delta = c L1^p ps_bracket`` on random ellipses.

    Returns the fitted constant and power, the worst relative error of the
    resolved normalization and that of the as-typeset ``1/(4 L1^2)``
    candidates (whole bracket and first-term-only grouping).
    """
    rng = np.random.default_rng(seed)
    logs_l, logs_r = [], []
    err_resolved = err_whole = err_literal = 0.0
    for _ in range(n_samples):
        L1 = float(rng.uniform(0.3, 3.0))
        e = float(rng.uniform(0.05, 0.95))
        G_hat = rng.normal(size=3)
        G_hat /= np.linalg.norm(G_hat)
        e_hat = np.cross(G_hat, rng.normal(size=3))
        e_hat /= np.linalg.norm(e_hat)
        N = rng.normal(size=3)
        N /= np.linalg.norm(N)
        G_vec = L1 * math.sqrt(1 - e * e) * G_hat
        p = pauli_souriau_point(G_vec, e * e_hat, L1, N)
        truth = (1 - e * e) * (1 - float(G_hat @ N) ** 2)
        br = ps_bracket(p)
        logs_l.append(math.log(L1))
        logs_r.append(math.log(truth / br))
        err_resolved = max(err_resolved, abs(ps_one_minus_e2_sin2(p) - truth) / truth)
        err_whole = max(err_whole, abs(0.25 * br / L1**2 - truth) / truth)
        err_literal = max(err_literal, abs(ps_bracket_literal(p) - truth) / truth)
    power, logc = np.polyfit(np.array(logs_l), np.array(logs_r), 1)
    return {
        "constant": float(math.exp(logc)),
        "L1_power": float(power),
        "resolved": {"constant": PS_CONSTANT, "L1_power": PS_POWER},
        "max_rel_error_resolved": err_resolved,
        "max_rel_error_typeset_whole_bracket": err_whole,
        "max_rel_error_typeset_first_term": err_literal,
    }


# --- regularized side -----------------------------------------------------------------


def f1(L2: float, masses: ThreeBodyMasses, f: float) -> float:
    """Inner energy offset ``f - mu2^3 M2^2 / (2 L2^2)``."""
    return f - masses.mu2**3 * masses.M2**2 / (2 * L2 * L2)


def f1_prime(L2: float, masses: ThreeBodyMasses) -> float:
    return masses.mu2**3 * masses.M2**2 / L2**3


def l2_prime(l2: float, L2: float, P1, Q1, masses: ThreeBodyMasses, f: float) -> float:
    """``l2 + f1'(L2) / (2 f1(L2)) <P1, Q1>``."""
    val = f1(L2, masses, f)
    if not val > 0:
        raise DomainError(f"f1(L2) = {val:g} must be positive")
    return l2 + f1_prime(L2, masses) / (2 * val) * float(np.dot(P1, Q1))


def fictitious_outer_mass(f: float, L1: float, L2: float, m0: float, m1: float) -> float:
    """Positive ``m2'`` with ``f1(L2; m0, m1, m2') = mu1^3 M1^2 / (2 L1^2)``."""
    M1 = m0 + m1
    mu1 = m0 * m1 / M1
    rhs = 2 * L2 * L2 * (f - mu1**3 * M1**2 / (2 * L1 * L1))
    if not rhs > 0:
        raise DomainError("need f > mu1^3 M1^2 / (2 L1^2)")

    def g(m):
        return M1**3 * m**3 / (M1 + m) - rhs

    hi = 1.0
    while g(hi) < 0:
        hi *= 2.0
    return brentq(g, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def fictitious_mass_residual(m2p: float, f: float, L1: float, L2: float, m0: float,
                             m1: float) -> float:
    """Relative residual of ``f1(L2; m2') = mu1^3 M1^2 / (2 L1^2)``."""
    masses = ThreeBodyMasses(m0, m1, m2p)
    target = masses.mu1**3 * masses.M1**2 / (2 * L1 * L1)
    return abs(f1(L2, masses, f) - target) / abs(target)


@dataclass(frozen=True)
class RegSecularState:
    """Inner regularized point and outer physical state."""

    inner: ksreg.KSState
    outer: CartesianOrbitState


def reg_average_numeric(state: RegSecularState, masses: ThreeBodyMasses, f: float,
                        n: int = 64) -> float:
    """Average of ``Freg_pert = |Q1| F_pert`` over ``(delta1, l2')``.

    The inner KS-ellipse is traced by its LCF fast angle (the eccentric anomaly);
    for each ``delta1`` the outer mean anomaly is ``l2 = l2' - c <P1, Q1>``.
    """
    el2 = elements_from_state(state.outer, outer_kepler(masses))
    if el2.degenerate or el2.circular:
        raise DomainError("outer orbit must be non-circular and non-degenerate")
    fi = f1(el2.L, masses, f)
    if not fi > 0:
        raise DomainError(f"f1(L2) = {fi:g} must be positive")
    m_in = inner_kepler(masses)
    el1 = ksreg.ks_ellipse_elements(state.inner, m_in, fi)
    if el1.circular or el1.degenerate:
        raise DomainError("inner KS-ellipse must be non-circular and non-degenerate")
    _check_separated(el1, el2)
    shifted_M = m_in.M + ksreg.ks_hamiltonian(state.inner, m_in, fi) / m_in.mu
    u = _grid(n)
    R1 = rotation_matrix(el1.inc, el1.g, el1.h)
    Q1 = perifocal_position(el1.a, el1.e, u) @ R1.T
    nmean = math.sqrt(shifted_M / el1.a**3)
    speed = el1.a * nmean / (1 - el1.e * np.cos(u))
    v_pf = np.stack([-np.sin(u), math.sqrt(1 - el1.e**2) * np.cos(u), np.zeros_like(u)],
                    axis=-1) * speed[:, None]
    P1 = m_in.mu * (v_pf @ R1.T)
    corr = f1_prime(el2.L, masses) / (2 * fi) * np.sum(P1 * Q1, axis=-1)
    l2 = _grid(n)[None, :] - corr[:, None]
    u2 = solve_kepler(l2, np.full_like(l2, el2.e))
    R2 = rotation_matrix(el2.inc, el2.g, el2.h)
    Q2 = perifocal_position(el2.a, el2.e, u2) @ R2.T
    s0, s1 = masses.sigma0, masses.sigma1
    a = Q1[:, None, :]
    rx = np.linalg.norm(Q2 - s0 * a, axis=-1)
    ry = np.linalg.norm(Q2 + s1 * a, axis=-1)
    r2 = np.linalg.norm(Q2, axis=-1)
    pert = -masses.mu1 * masses.m2 * ((1 / rx - 1 / r2) / s0 + (1 / ry - 1 / r2) / s1)
    r1 = np.linalg.norm(Q1, axis=-1)[:, None]
    return _mean(r1 * pert)


def secular_conjugacy_residual(state: RegSecularState, masses: ThreeBodyMasses, f: float,
                               n: int = 64) -> dict[str, float]:
    """``Freg_sec`` against ``a1 F_sec o k_f`` (``a1`` of the inner KS-ellipse)."""
    reg = reg_average_numeric(state, masses, f, n)
    el2 = elements_from_state(state.outer, outer_kepler(masses))
    fi = f1(el2.L, masses, f)
    m_in = inner_kepler(masses)
    el1 = elements_from_state(kf_image(state.inner, m_in, fi), m_in)
    rhs = el1.a * average_pert_numeric(el1, el2, masses, n)
    return {"reg": reg, "kf": rhs, "residual": abs(reg - rhs) / abs(reg)}


def freg_quad(q: QuadChartPoint, masses: ThreeBodyMasses) -> float:
    """Reduced regularized quadrupolar Hamiltonian.

    ``q`` carries the LCF values ``(Lc1, Gc1, gamma1)`` in ``(L1, G1, g1)``;
    the result ``-(mu1 m2) L2^3 / (8 G2^3) B`` does not depend on ``f`` or ``a1``.
    """
    return f_quad(replace(q, a1=1.0), masses)


def freg_quad_gradient(q: QuadChartPoint, masses: ThreeBodyMasses) -> dict[str, float]:
    return f_quad_gradient(replace(q, a1=1.0), masses)


def freg_quad_pipeline(q: QuadChartPoint, masses: ThreeBodyMasses, f: float,
                       delta1: float = 0.3, l2: float = 0.0) -> float:
    """``a1 F_quad o k_f`` evaluated through an explicit regularized configuration.

    The reduced LCF point is realized as a KS state (nodes eliminated with ``C``
    vertical), mapped by ``k_f`` to a physical inner ellipse, and read back in
    the Delaunay chart relative to the mutual node.
    """
    L2 = q.L2
    fi = f1(L2, masses, f)
    if not fi > 0:
        raise DomainError(f"f1(L2) = {fi:g} must be positive")
    H1, H2 = node_actions(q.G1, q.G2, q.C)
    m_in = inner_kepler(masses)
    s = state_from_spatial_lcf(SpatialLCF(q.L1, delta1, q.G1, q.g1, H1, math.pi), m_in, fi)
    phys = kf_image(s, m_in, fi)
    el1 = elements_from_state(phys, m_in)
    el2 = delaunay_from_actions(L2, l2, q.G2, q.g2, H2, 0.0, outer_kepler(masses))
    outer = state_from_elements(el2, outer_kepler(masses))
    G1_vec = phys.angular_momentum
    G2_vec = outer.angular_momentum
    g1 = mutual_node_angle(G1_vec, eccentricity_vector(phys, m_in), G2_vec)
    qt = QuadChartPoint(L1=el1.L, G1=el1.G, g1=g1, G2=q.G2, g2=q.g2,
                        C=float(np.linalg.norm(G1_vec + G2_vec)), L2=L2, a1=el1.a)
    return el1.a * f_quad(qt, masses)


# --- reduced flows and the conjugacy check ---------------------------------------------


def _reduced_value_grad(x, L1: float, C: float, pref_num: float):
    """Braces and partials on ``x = (g1, g2, G1, G2)``; ``pref_num`` multiplies ``1/G2^3``."""
    g, _, G1, G2 = x
    pref = pref_num / G2**3
    xx = (G1 / L1) ** 2
    D = C * C - G1 * G1 - G2 * G2
    X = D * D / (4 * G1 * G1 * G2 * G2)
    c2 = math.cos(g) ** 2
    s2 = 1.0 - c2
    B = 3 * xx * (1 + X) + 15 * (1 - xx) * (c2 + s2 * X) - 6 * (1 - xx) - 4
    B_x = 3 * (1 + X) - 15 * (c2 + s2 * X) + 6
    B_X = 3 * xx + 15 * (1 - xx) * s2
    B_g = 15 * (1 - xx) * math.sin(2 * g) * (X - 1)
    X_G1 = -D / (G1 * G2 * G2) - D * D / (2 * G1**3 * G2 * G2)
    X_G2 = -D / (G1 * G1 * G2) - D * D / (2 * G1 * G1 * G2**3)
    grad = np.array([
        pref * B_g,
        0.0,
        pref * (B_x * 2 * G1 / (L1 * L1) + B_X * X_G1),
        -3 * pref / G2 * B + pref * B_X * X_G2,
    ])
    return pref * B, grad


def reduced_hamiltonian(q0: QuadChartPoint, masses: ThreeBodyMasses, regularized: bool
                        ) -> Hamiltonian:
    """Reduced flow on ``x = (g1, g2, G1, G2)`` with ``L1, L2, C, a1`` frozen.

    Same expressions as :func:`f_quad` and :func:`f_quad_gradient` (checked in the
    tests), written on raw floats for integration speed.
    """
    a1 = 1.0 if regularized else q0.a1
    pref_num = -(masses.mu1 * masses.m2) * q0.L2**3 / (8 * a1)
    L1, C = q0.L1, q0.C

    def value(x):
        return _reduced_value_grad(x, L1, C, pref_num)[0]

    def gradient(x):
        return _reduced_value_grad(x, L1, C, pref_num)[1]

    return Hamiltonian(value, gradient)


def _state(q: QuadChartPoint) -> np.ndarray:
    return np.array([q.g1, q.g2, q.G1, q.G2])


def estimate_period(H: Hamiltonian, x0: np.ndarray, dt: float, max_steps: int = 200000
                    ) -> float:
    """Period of the reduced ``(G1, g1)`` motion by a Poincare section through ``x0``.

    The section is the hyperplane through ``x0`` normal to the initial velocity,
    in the embedding ``(G1, cos 2 g1, sin 2 g1)`` (the flow is invariant under
    ``g1 -> g1 + pi``).
    """

    def embed(x):
        return np.array([x[2], math.cos(2 * x[0]), math.sin(2 * x[0])])

    y0 = embed(x0)
    v = embed(x0 + 1e-6 * H.vector_field(x0)) - y0
    v /= np.linalg.norm(v)
    x = x0.copy()
    prev = 0.0
    left = False
    for k in range(1, max_steps + 1):
        x_new = midpoint_step(H, x, dt)
        s = float((embed(x_new) - y0) @ v)
        dist = np.linalg.norm(embed(x_new) - y0)
        if dist > 1e-3:
            left = True
        if left and prev < 0 <= s and dist < 0.5:
            frac = -prev / (s - prev)
            return (k - 1 + frac) * dt
        prev = s
        x = x_new
    raise DomainError("no return to the section found")


@dataclass(frozen=True)
class ConjugacyReport:
    m2_prime: float
    root_residual: float
    time_scale: float
    period: float
    periods: float
    sup_distance: float
    energy_drift: float
    G2_drift: float
    pipeline_residual: float


def quad_flow_conjugacy_check(q0: QuadChartPoint, masses: ThreeBodyMasses, f: float,
                              periods: float = 10.0, steps_per_period: int = 400,
                              order: int = 6, scheme: str = "gauss",
                              pipeline_samples: int = 5
                              ) -> ConjugacyReport:
    """Integrate the reduced regularized and non-regularized flows and compare.

    ``q0`` holds the LCF values ``(Lc1, Gc1, gamma1, G2, g2)``.  The
    non-regularized flow uses ``m2'`` and ``L1 = Lc1``, ``a1 = Lc1^2/(mu1^2 M1)``;
    its time is rescaled by ``a1 m2 / m2'``.
    """
    m2p = fictitious_outer_mass(f, q0.L1, q0.L2, masses.m0, masses.m1)
    root = fictitious_mass_residual(m2p, f, q0.L1, q0.L2, masses.m0, masses.m1)
    a1 = inner_semi_major_axis(q0.L1, masses)
    c = a1 * masses.m2 / m2p
    masses_p = masses.with_m2(m2p)
    q_target = replace(q0, a1=a1)
    H_reg = reduced_hamiltonian(q0, masses, regularized=True)
    H_tgt = reduced_hamiltonian(q_target, masses_p, regularized=False)
    x0 = _state(q0)
    # Rough period of the target flow, then a step that resolves it.
    probe = abs(H_tgt.grad(x0)).max()
    period = float(estimate_period(H_tgt, x0, dt=0.02 / max(probe, 1e-12)))
    dt_t = period / steps_per_period
    nsteps = int(round(periods * steps_per_period))
    traj_t = symplectic_integrate(H_tgt, x0, dt_t, nsteps, order=order, scheme=scheme)
    traj_r = symplectic_integrate(H_reg, x0, dt_t / c, nsteps, order=order, scheme=scheme)
    diff = traj_r - traj_t
    diff[:, 0] = angle_diff(traj_r[:, 0], traj_t[:, 0])
    diff[:, 1] = angle_diff(traj_r[:, 1], traj_t[:, 1])
    scale = np.maximum(1.0, np.abs(traj_t))
    scale[:, :2] = 1.0
    sup = float(np.max(np.abs(diff) / scale))
    energies = np.array([H_tgt.value(x) for x in traj_t])
    e_drift = float(np.max(np.abs(energies - energies[0])) / abs(energies[0]))
    g2_drift = float(max(np.max(np.abs(traj_t[:, 3] - x0[3])),
                         np.max(np.abs(traj_r[:, 3] - x0[3]))))
    pipe = 0.0
    idx = np.linspace(0, nsteps, pipeline_samples).astype(int)
    for k in idx:
        x = traj_r[k]
        qk = replace(q0, g1=x[0], g2=x[1], G1=x[2], G2=x[3])
        closed = freg_quad(qk, masses)
        pipe = max(pipe, abs(freg_quad_pipeline(qk, masses, f) - closed) / abs(closed))
    return ConjugacyReport(
        m2_prime=m2p, root_residual=root, time_scale=c, period=period, periods=periods,
        sup_distance=sup, energy_drift=e_drift, G2_drift=g2_drift, pipeline_residual=pipe,
    )


def portrait_grid(L1: float, G2: float, C: float, masses: ThreeBodyMasses, L2: float | None = None,
                  n_g: int = 181, n_x: int = 121) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``F_quad`` on the ``(g1, G1/L1)`` rectangle at fixed ``(L1, G2, C)``.

    Points violating the triangle inequality are NaN; ``G1 = 0`` uses the
    analytic extension.
    """
    L2 = G2 if L2 is None else L2
    a1 = inner_semi_major_axis(L1, masses)
    g = np.linspace(0.0, math.pi, n_g)
    xs = np.linspace(0.0, 1.0, n_x)
    vals = np.full((n_x, n_g), np.nan)
    for i, r in enumerate(xs):
        G1 = r * L1
        for j, gg in enumerate(g):
            q = QuadChartPoint(L1=L1, G1=G1, g1=gg, G2=G2, g2=0.0, C=C, L2=L2, a1=a1)
            try:
                vals[i, j] = f_quad(q, masses)
            except DomainError:
                pass
    return g, xs, vals
