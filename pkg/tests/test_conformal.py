import math

import numpy as np
import pytest

from heatbounds import conformal as cf
from heatbounds import fields as fl
from heatbounds import geometry as geo
from heatbounds.errors import DivergenceError, InvalidParameterError


def test_polyline_validation():
    with pytest.raises(InvalidParameterError):
        cf.Polyline(np.zeros((1, 2)))
    with pytest.raises(InvalidParameterError):
        cf.Polyline(np.array([[0.0, 0.0], [0.0, 0.0]]))


def test_conformal_length_flat_segment():
    seg = cf.Polyline.segment([0.0, 0.0], [3.0, 4.0], 17)
    assert cf.conformal_length(fl.Constant(0.0, 2), seg) == pytest.approx(5.0)


def test_conformal_length_constant_scaling_exact():
    rng = np.random.default_rng(0)
    poly = cf.Polyline(np.cumsum(rng.normal(size=(12, 2)), axis=0))
    base = cf.conformal_length(fl.Constant(0.0, 2), poly)
    for c in (-0.7, 0.3, 1.9):
        scaled = cf.conformal_length(fl.Constant(c, 2), poly)
        assert scaled == pytest.approx(math.exp(c) * base, rel=1e-14)


def test_quarter_circle_log_weight():
    psi = fl.LogRadial((0.0, 0.0), 1.0)
    th = np.linspace(0, np.pi / 2, 512)
    arc = cf.Polyline(np.column_stack([np.cos(th), np.sin(th)]))
    assert abs(cf.conformal_length(psi, arc) - np.pi / 2) < 1e-4


def test_geodesic_flat_is_straight():
    g = cf.geodesic(fl.Constant(0.0, 2), [0.0, 0.0], [3.0, 4.0], n_vertices=33)
    assert cf.conformal_length(fl.Constant(0.0, 2), g) == pytest.approx(5.0, abs=1e-9)
    s = np.linspace(0, 1, 33)[:, None]
    straight = s * np.array([3.0, 4.0])
    assert np.max(np.abs(g.vertices - straight)) < 1e-6


def test_geodesic_monotone_vs_initializer():
    psi = fl.sine(axis=0, amp=0.6, freq=1.7, dim=2)
    x, y = [0.0, 0.0], [2.0, 0.5]
    chord = cf.Polyline.segment(x, y, 65)
    g = cf.geodesic(psi, x, y, n_vertices=65)
    assert cf.conformal_length(psi, g) <= cf.conformal_length(psi, chord) + 1e-12


def test_geodesic_coincident_endpoints():
    with pytest.raises(InvalidParameterError):
        cf.geodesic(fl.Constant(0.0, 2), [1.0, 1.0], [1.0, 1.0])


def test_totally_geodesic_circle_regression():
    psi = fl.LogRadial((0.0, 0.0), 1.0)
    x = [np.cos(-np.pi / 4), np.sin(-np.pi / 4)]
    y = [np.cos(np.pi / 4), np.sin(np.pi / 4)]
    g = cf.geodesic(psi, x, y, n_vertices=129)
    rad = np.linalg.norm(g.vertices, axis=1)
    assert np.max(np.abs(rad - 1.0)) <= 1e-3


def test_conformal_distance_cases():
    assert cf.conformal_distance(fl.Constant(0.0, 2), [0, 0], [1, 1], n_vertices=17) == pytest.approx(math.sqrt(2), abs=1e-9)
    c = 0.4
    d = cf.conformal_distance(fl.Constant(c, 2), [0, 0], [1, 1], n_vertices=17)
    assert d == pytest.approx(math.exp(c) * math.sqrt(2), abs=1e-8)
    psi = fl.LogRadial((0.0, 0.0), 1.0)
    d2 = cf.conformal_distance(psi, [1.0, 0.0], [0.0, 1.0], n_vertices=257)
    assert abs(d2 - np.pi / 2) < 5e-3


def test_conformal_distance_symmetry():
    psi = fl.LogRadial((0.0, 0.0), 1.0)
    x, y = [1.0, 0.0], [0.0, 1.0]
    d1 = cf.conformal_distance(psi, x, y, n_vertices=65)
    d2 = cf.conformal_distance(psi, y, x, n_vertices=65)
    assert abs(d1 - d2) <= 1e-6 * d1


def test_conformal_distance_triangle_inequality():
    psi = fl.sine(axis=0, amp=0.4, freq=1.0, dim=2)
    pts = [np.array(p) for p in ([0.0, 0.0], [1.2, 0.3], [0.5, 1.0])]
    d = {}
    for i in range(3):
        for j in range(3):
            if i != j:
                d[i, j] = cf.conformal_distance(psi, pts[i], pts[j], n_vertices=65)
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        assert d[i, j] <= d[i, k] + d[k, j] + 1e-6


def test_mesh_convergence_second_order():
    psi = fl.sine(axis=0, amp=0.5, freq=1.3, dim=2)
    x, y = [0.0, 0.0], [2.0, 1.0]
    d = [cf.conformal_distance(psi, x, y, n_vertices=m) for m in (17, 33, 65)]
    e1 = abs(d[0] - d[2])
    e2 = abs(d[1] - d[2])
    assert e2 < e1 / 3.0  # consistent with O(h^2)


def test_curvature_bound_spec_validation():
    with pytest.raises(InvalidParameterError):
        cf.CurvatureBoundSpec(fl.Constant(0.0, 2), N=3, N_prime=3)
    spec = cf.CurvatureBoundSpec(fl.Constant(0.0, 2), N=3, N_prime=4)
    assert spec.gamma_coefficient == pytest.approx(2.0)
    assert spec.effective_dimension == pytest.approx(4.0)
    spec_inf = cf.CurvatureBoundSpec(fl.Constant(0.0, 2), N=3.5)
    assert spec_inf.gamma_coefficient == pytest.approx(1.5)


def test_timechange_curvature_constant_psi():
    spec = cf.CurvatureBoundSpec(fl.Constant(1.2, 2), N=2, N_prime=math.inf)
    for c in (-0.4, 0.0, 0.8):
        val = cf.timechange_curvature(spec, fl.Constant(c, 2), [0.3, -0.7])
        assert val == pytest.approx(math.exp(-2 * c) * 1.2)


def test_timechange_curvature_hand_case():
    # psi = x1, N = 3, N' = 4, k = 0 at the origin: coefficient (1*2/1) = 2
    spec = cf.CurvatureBoundSpec(fl.Constant(0.0, 2), N=3, N_prime=4)
    val = cf.timechange_curvature(spec, fl.Linear((1.0, 0.0)), [0.0, 0.0])
    assert val == pytest.approx(-2.0)


def test_timechange_curvature_dim2_is_minus_laplacian():
    # N = 2, N' = infinity: k' = -e^{-2 psi} Delta psi
    spec = cf.CurvatureBoundSpec(fl.Constant(0.0, 2), N=2, N_prime=math.inf)
    psi = fl.Separable2D(fl.CantorProfile(2), fl.SeptichWell())
    pts = np.column_stack([np.linspace(0.4, 0.6, 11), np.linspace(-0.5, 0.5, 11)])
    vals = cf.timechange_curvature(spec, psi, pts)
    expect = -np.exp(-2 * psi(pts)) * psi.laplacian(pts)
    assert np.allclose(vals, expect, atol=1e-12)


def test_timechange_parametrization_consistency():
    rng = np.random.default_rng(12)
    pts = rng.normal(size=(1000, 2))
    spec = cf.CurvatureBoundSpec(fl.sine(0, 0.5, 1.3, dim=2), N=2.7, N_prime=9.0)
    psi = fl.sine(axis=1, amp=0.4, freq=0.9, dim=2)
    a = cf.timechange_curvature(spec, psi, pts, "psi")
    b = cf.timechange_curvature(spec, psi, pts, "phi")
    denom = np.maximum(np.abs(a), 1e-10)
    assert np.max(np.abs(a - b) / denom) < 1e-10
    with pytest.raises(InvalidParameterError):
        cf.timechange_curvature(spec, psi, pts, "rho")


def test_convexity_ball_pass_complement_fail():
    ball = geo.Ball((0.0, 0.0), 1.0)
    pairs = cf.boundary_pair_sampler(ball, 5, max_separation=np.pi / 2, inset=1e-9)
    rep = cf.check_local_convexity(ball, fl.Constant(0.0, 2), pairs)
    assert rep.verdict == "PASS"

    bc = geo.BallComplement((0.0, 0.0), 1.0)
    pairs2 = cf.boundary_pair_sampler(bc, 5, max_separation=np.pi * 0.9)
    rep2 = cf.check_local_convexity(bc, fl.Constant(0.0, 2), pairs2)
    assert rep2.verdict == "FAIL"
    # the straight-chord violation is analytic: max V = 1 - cos(sep/2)
    assert rep2.lhs == pytest.approx(1 - math.cos(np.pi * 0.45), abs=1e-6)


def test_convexified_complement_passes():
    bc = geo.BallComplement((0.0, 0.0), 1.0)
    pairs = cf.boundary_pair_sampler(bc, 5, max_separation=np.pi / 2)
    psi = cf.convexification_weight(bc, -1.0, 0.05)
    rep = cf.check_local_convexity(bc, psi, pairs, tol=1e-3)
    assert rep.verdict == "PASS"


def test_pair_sampler_default_covering_radius():
    ball = geo.Ball((0.0, 0.0), 2.0)
    pairs = cf.boundary_pair_sampler(ball, 4)
    for x, y in pairs:
        # default covering radius r/4 -> angular separation <= 1/4
        cosang = float(x @ y) / 4.0
        assert math.acos(np.clip(cosang, -1, 1)) <= 0.25 + 1e-9


def test_evi_flow_quadratic_exact():
    lam = 1.3
    V = fl.RadialPoly((0.0, lam / 2), (0.0, 0.0))
    times, traj = cf.evi_flow(V, [1.0, 0.5], 2.0, 0.05)
    exact = np.exp(-lam * times)[:, None] * np.array([1.0, 0.5])
    assert np.max(np.abs(traj - exact)) < 1e-6


def test_evi_contraction_saturates_quadratic():
    lam = 1.3
    V = fl.RadialPoly((0.0, lam / 2), (0.0, 0.0))
    rep = cf.contraction_report(V, fl.Constant(lam, 2), [1.0, 0.5], [-0.3, 0.8], 2.0, 0.05)
    assert rep.verdict == "PASS"
    dist = np.asarray(rep.lhs)
    bound = np.asarray(rep.rhs)
    assert np.max(np.abs(dist - bound)) < 1e-6  # equality case


def test_evi_contraction_quartic_annulus():
    V = fl.RadialPoly((0.0, 0.0, 0.25), (0.0, 0.0))
    ell = fl.RadialPoly((0.0, 1.0), (0.0, 0.0))
    rep = cf.contraction_report(V, ell, [1.2, 0.0], [0.0, 1.5], 1.5, 0.01)
    assert rep.verdict == "PASS"
    assert rep.slack >= -1e-9


def test_evi_divergence_guard():
    # V = -|x|^2: flow blows up outward
    V = fl.RadialPoly((0.0, -1.0), (0.0, 0.0))
    with pytest.raises(DivergenceError):
        cf.evi_flow(V, [1.0, 0.0], 40.0, 0.5, grad_bound=1e3)


def test_geodesic_csv_export(tmp_path):
    psi = fl.LogRadial((0.0, 0.0), 1.0)
    dom = geo.BallComplement((0.0, 0.0), 1.0)
    g = cf.geodesic(psi, [1.0, 0.0], [0.0, 1.0], n_vertices=17)
    dest = tmp_path / "geo.csv"
    g.to_csv(dest, domain=dom, psi=psi)
    header = dest.read_text().splitlines()[0]
    assert header == "s,x1,x2,V,psi"
    data = np.loadtxt(dest, delimiter=",", skiprows=1)
    assert data.shape == (17, 5)
