import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ksquad import kepler, quadrupolar as qd
from ksquad.errors import DomainError
from ksquad.quadrupolar import LaplaceChartPoint, OuterParams, QuadChartPoint
from ksquad.threebody import mass_params

EQUAL = mass_params(1, 1, 1)
# 30-digit root of m^3 - m - 2 = 0 (mpmath).
FICTITIOUS_ROOT = 1.52137970680456756960408083225


def _point(**kw):
    base = dict(L1=1.0, G1=1.0, g1=0.0, G2=1.0, g2=0.0, C=math.sqrt(2), L2=1.0, a1=1.0)
    base.update(kw)
    return QuadChartPoint(**base)


def test_f_quad_examples():
    assert qd.f_quad(_point(), EQUAL) == pytest.approx(0.0625, abs=1e-15)
    assert qd.f_quad(_point(G1=0.0, C=1.0), EQUAL) == pytest.approx(-0.3125, abs=1e-15)


def test_f_quad_domain():
    with pytest.raises(DomainError):
        qd.f_quad(_point(G2=0.0), EQUAL)
    with pytest.raises(DomainError):
        qd.f_quad(_point(C=3.0), EQUAL)
    with pytest.raises(DomainError):
        qd.f_quad(_point(G1=1.5), EQUAL)


@given(st.floats(0, 2 * math.pi))
def test_f_quad_independent_of_g2(g2):
    q = _point(G1=0.7, C=1.2, g1=0.4)
    assert qd.f_quad(replace(q, g2=g2), EQUAL) == qd.f_quad(q, EQUAL)


def test_f_quad_degenerate_limit_is_continuous():
    q0 = _point(G1=0.0, C=1.0, g1=0.8)
    vals = [qd.f_quad(replace(q0, G1=eps, C=math.sqrt(1 + eps**2)), EQUAL)
            for eps in (1e-2, 1e-3, 1e-4)]
    diffs = [abs(v - qd.f_quad(q0, EQUAL)) for v in vals]
    assert diffs[2] < diffs[1] < diffs[0] < 1e-2


def _fd(fn, x, eps=1e-6):
    return (fn(x + eps) - fn(x - eps)) / (2 * eps)


@pytest.mark.parametrize("G1, g1, G2, C", [(0.6, 0.3, 1.1, 1.2), (0.9, 2.0, 0.8, 1.0),
                                          (0.3, 4.0, 1.5, 1.4)])
def test_f_quad_gradient(G1, g1, G2, C):
    m = mass_params(1, 0.4, 2)
    q = _point(G1=G1, g1=g1, G2=G2, C=C, L2=1.7, a1=0.9)
    g = qd.f_quad_gradient(q, m)
    for key in ("G1", "g1", "G2"):
        num = _fd(lambda v: qd.f_quad(replace(q, **{key: v}), m), getattr(q, key))
        assert g[key] == pytest.approx(num, rel=1e-7, abs=1e-10)
    assert g["g2"] == 0.0
    H = qd.reduced_hamiltonian(q, m, regularized=False)
    x = np.array([q.g1, q.g2, q.G1, q.G2])
    assert H.value(x) == pytest.approx(qd.f_quad(q, m), rel=1e-14)
    np.testing.assert_allclose(H.grad(x), [g["g1"], 0, g["G1"], g["G2"]], rtol=1e-12)
    Hr = qd.reduced_hamiltonian(q, m, regularized=True)
    assert Hr.value(x) == pytest.approx(qd.freg_quad(q, m), rel=1e-14)


@pytest.mark.parametrize("p, expected", [
    (LaplaceChartPoint(e1=0, g1=0, Delta=0, e2=0, a1=1), -2.125),
    (LaplaceChartPoint(e1=1, g1=math.pi / 2, Delta=math.pi / 2, e2=0, a1=1), 1.25),
])
def test_f_quad_laplace_examples(p, expected):
    assert qd.f_quad_laplace(p, 1.0, 1.0) == pytest.approx(expected, abs=1e-15)


def test_laplace_chart_forms(rng):
    for _ in range(50):
        m = mass_params(*rng.uniform(0.3, 2, size=3))
        G2 = rng.uniform(0.5, 2)
        L1 = rng.uniform(0.3, 2)
        G1 = rng.uniform(0.05, 1) * L1
        C = rng.uniform(abs(G1 - G2), G1 + G2)
        q = QuadChartPoint(L1=L1, G1=G1, g1=rng.uniform(0, 6), G2=G2, g2=0.0, C=C,
                           L2=G2 / math.sqrt(1 - rng.uniform(0, 0.8) ** 2), a1=1.3)
        lp = qd.laplace_from_quad(q)
        corrected = qd.f_quad_laplace_corrected(lp, m.mu1, m.m2)
        assert corrected == pytest.approx(qd.f_quad(q, m), rel=1e-11, abs=1e-13)
        expanded = qd.f_quad_laplace_expanded(lp, m.mu1, m.m2)
        pref = -m.mu1 * m.m2 / (8 * q.a1 * (1 - lp.e2**2) ** 1.5)
        # The gap vanishes only for e1 = 1 or sin g1 sin Delta = 1.
        gap = pref * 15 * (1 - lp.e1**2) * (1 - (math.sin(lp.g1) * math.sin(lp.Delta)) ** 2)
        assert expanded - corrected == pytest.approx(gap, rel=1e-10, abs=1e-13)


def test_chart_adjudication_supports_closed_form():
    res = qd.adjudicate_chart(mass_params(1, 0.25, 1), alpha=0.005)
    assert res["supported"] == "delaunay_form"
    assert res["residual_delaunay_form"] < 0.01 < res["residual_laplace_expanded"]


def _ps_point(rng, L1):
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    e_dir = np.cross(n, rng.normal(size=3))
    e_dir /= np.linalg.norm(e_dir)
    e = rng.uniform(0.05, 0.95)
    G = L1 * math.sqrt(1 - e * e) * n
    N = rng.normal(size=3)
    N /= np.linalg.norm(N)
    return qd.pauli_souriau_point(G, e * e_dir, L1, N), n, e


def test_ps_sphere_and_normalization(rng):
    for _ in range(50):
        L1 = rng.uniform(0.2, 3)
        p, n, e = _ps_point(rng, L1)
        assert p.A @ p.A == pytest.approx(L1, rel=1e-12)
        assert p.B @ p.B == pytest.approx(L1, rel=1e-12)
        sin2 = 1 - float(n @ p.N) ** 2
        assert qd.ps_one_minus_e2_sin2(p) == pytest.approx((1 - e * e) * sin2, abs=1e-12)
        assert qd.ps_one_minus_e2(p) == pytest.approx(1 - e * e, rel=1e-12)


def test_ps_typeset_normalization_fails_off_unit_sphere(rng):
    p, n, e = _ps_point(rng, 2.5)
    sin2 = 1 - float(n @ p.N) ** 2
    typeset = qd.ps_one_minus_e2_sin2(p, constant=0.25, power=-2)
    assert abs(typeset - (1 - e * e) * sin2) > 1e-3


def test_ps_normalization_fit():
    res = qd.adjudicate_ps_normalization(n_samples=20, seed=3)
    assert res["constant"] == pytest.approx(0.25, rel=1e-9)
    assert res["L1_power"] == pytest.approx(-1, abs=1e-9)


@pytest.mark.parametrize("g1", [0.0, 0.4, 1.3, 2.9])
def test_ps_degenerate_matches_extension(g1):
    L1 = 1.0
    e = np.array([math.cos(g1), 0.0, math.sin(g1)])
    A = -math.sqrt(L1) * e
    p = qd.PauliSouriauPoint(A, A.copy(), [0, 0, 1.0])
    assert qd.ps_one_minus_e2_sin2(p) == 0.0
    aux = OuterParams(mu1=EQUAL.mu1, m2=EQUAL.m2, a1=1.0, e2=0.0)
    ps = qd.f_quad_pauli_souriau(p, aux, form="polynomial")
    ext = qd.f_quad(_point(G1=0.0, C=1.0, g1=g1), EQUAL)
    assert ps == pytest.approx(ext, rel=1e-12)
    ratio = qd.f_quad_pauli_souriau(p, aux, form="ratio")
    assert ratio == pytest.approx(ext, rel=1e-12)


def test_ps_circular_singularity():
    p = qd.pauli_souriau_point([0, 0, 1.0], [0, 0, 0], 1.0, [0, 0, 1.0])
    with pytest.raises(DomainError):
        qd.ps_sin2g_sin2(p)
    with pytest.raises(ValueError):
        qd.f_quad_pauli_souriau(p, OuterParams(1, 1, 1, 0), form="other")


def test_pericenter_projection_ratio():
    N = np.array([0, 0, 1.0])
    assert qd.pericenter_projection_ratio([1, 0, 0], N) == 0.0
    assert qd.pericenter_projection_ratio([1, 0, 1], N) == pytest.approx(0.5)


def _configuration(alpha, m=EQUAL, **kw):
    q = qd.sweep_point(m, alpha, **kw)
    return q, qd.configuration_from_quad_chart(q, m)


def test_average_phase_independent():
    _, (el1, el2) = _configuration(0.05, e1=0.2, e2=0.2)
    a = qd.average_pert_numeric(el1, el2, EQUAL, 64)
    b = qd.average_pert_numeric(el1, el2, EQUAL, 64, phase1=0.37, phase2=1.9)
    assert abs(a - b) < 1e-12 * abs(a)


def test_average_converges():
    _, (el1, el2) = _configuration(0.05, e1=0.2, e2=0.2)
    a = qd.average_pert_numeric(el1, el2, EQUAL, 32)
    b = qd.average_pert_numeric(el1, el2, EQUAL, 64)
    assert abs(a - b) < 1e-10 * abs(b)


def test_average_matches_quadrupole():
    q, (el1, el2) = _configuration(0.01)
    avg = qd.average_pert_numeric(el1, el2, EQUAL, 64) / 0.01**3
    fq = qd.f_quad(replace(q, a1=el1.a), EQUAL)
    assert avg == pytest.approx(fq, rel=0.05)
    assert qd.expansion_remainder(q, EQUAL) < 0.05


def test_quadrupole_integral_normalization():
    q, (el1, el2) = _configuration(0.005)
    res = qd.quad_integral_numeric(el1, el2, EQUAL, 64)
    fq = qd.f_quad(replace(q, a1=el1.a), EQUAL)
    assert res["mean"] == pytest.approx(fq, rel=1e-10)
    assert res["as_typeset"] == pytest.approx(-4 * math.pi**2 * fq, rel=1e-10)


def test_average_rejects_crossing_orbits():
    el = kepler.delaunay_from_actions(1.0, 0, 0.8, 0, 0.5, 0, qd.inner_kepler(EQUAL))
    with pytest.raises(DomainError):
        qd.average_pert_numeric(el, el, EQUAL, 16)


def test_l2_prime():
    m = mass_params(1, 1, 1)
    assert qd.l2_prime(0.3, 1.0, [0, 1, 0], [1, 0, 0], m, 5.0) == 0.3
    shifted = qd.l2_prime(0.3, 1.0, [1, 0, 0], [1, 0, 0], m, 5.0)
    expected = 0.3 + qd.f1_prime(1.0, m) / (2 * qd.f1(1.0, m, 5.0))
    assert shifted == pytest.approx(expected)
    with pytest.raises(DomainError):
        qd.l2_prime(0.3, 1.0, [1, 0, 0], [1, 0, 0], m, 0.1)


def test_fictitious_mass_example():
    m2p = qd.fictitious_outer_mass(4.25, 1.0, 1.0, 1.0, 1.0)
    assert m2p == pytest.approx(FICTITIOUS_ROOT, rel=1e-14)
    assert 8 * m2p**3 / (2 + m2p) == pytest.approx(8, rel=1e-14)
    assert qd.fictitious_mass_residual(m2p, 4.25, 1.0, 1.0, 1.0, 1.0) < 1e-14


def test_fictitious_mass_boundary():
    boundary = 0.5**3 * 2**2 / 2
    small = [qd.fictitious_outer_mass(boundary + d, 1.0, 1.0, 1.0, 1.0) for d in (1e-2, 1e-4, 1e-6)]
    assert small[0] > small[1] > small[2] > 0
    assert small[2] < 1e-2
    with pytest.raises(DomainError):
        qd.fictitious_outer_mass(boundary, 1.0, 1.0, 1.0, 1.0)


def test_regularized_pipeline_matches_closed_form():
    m = mass_params(1, 0.5, 1)
    q = QuadChartPoint(L1=0.4, G1=0.3, g1=0.7, G2=1.5, g2=0.2, C=1.6, L2=1.8, a1=1.0)
    f = 5.0
    closed = qd.freg_quad(q, m)
    for delta1 in (0.1, 2.0, 4.5):
        pipe = qd.freg_quad_pipeline(q, m, f, delta1=delta1)
        assert pipe == pytest.approx(closed, rel=1e-9)


def test_conjugacy_short_run():
    m = mass_params(1, 0.5, 1)
    q = QuadChartPoint(L1=0.4, G1=0.3, g1=0.7, G2=1.5, g2=0.2, C=1.6, L2=1.8, a1=1.0)
    rep = qd.quad_flow_conjugacy_check(q, m, 5.0, periods=1.0, steps_per_period=400,
                                       pipeline_samples=2)
    assert rep.root_residual < 1e-13
    assert rep.sup_distance < 1e-6
    assert rep.energy_drift < 1e-10
    assert rep.G2_drift < 1e-12
    assert rep.pipeline_residual < 1e-9


def test_portrait_grid_masks_forbidden_region():
    g, xs, vals = qd.portrait_grid(1.0, 1.0, 1.2, EQUAL, n_g=19, n_x=11)
    assert vals.shape == (11, 19)
    assert np.isnan(vals[1]).all()  # G1 = 0.1 L1 violates |G1 - G2| <= C
    assert np.isfinite(vals[-1]).all()


def test_node_angles():
    with pytest.raises(DomainError):
        qd.mutual_node_angle([0, 0, 1.0], [1, 0, 0], [0, 0, 2.0])
    g = qd.mutual_node_angle([0, 0, 1.0], [0, 1, 0], [1, 0, 0])
    assert g == pytest.approx(math.pi)
    H1, H2 = qd.node_actions(0.6, 0.8, 1.0)
    assert (H1, H2) == pytest.approx((0.36, 0.64))
