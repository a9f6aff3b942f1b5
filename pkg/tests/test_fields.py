import numpy as np
import pytest

from heatbounds import conformal as cf
from heatbounds import fields as fl
from heatbounds import geometry as geo
from heatbounds.errors import InvalidParameterError, SingularityError


def _field_cases():
    bc = geo.BallComplement((0.0, 0.0), 1.0)
    return [
        ("constant", fl.Constant(1.7, dim=2), None),
        ("linear", fl.Linear((1.0, -2.0), 0.3), None),
        ("sine", fl.sine(axis=1, amp=0.4, freq=2.3, dim=2), None),
        ("radial_poly", fl.RadialPoly((1.0, -0.5, 0.25), (0.2, -0.1)), None),
        ("log_radial", fl.LogRadial((0.0, 0.0), 0.7), 0.3),
        ("comparison", fl.ComparisonPotentialField(1.2, (0.1, 0.1)), None),
        ("convexification", cf.convexification_weight(bc, -1.0, 0.05), 0.3),
        ("separable", fl.Separable2D(fl.CosSqBump(), fl.SeptichWell()), None),
        ("exp", fl.ExpOf(fl.sine(axis=0, amp=0.5, freq=1.1, dim=2)), None),
        ("product", fl.FieldProduct(fl.Linear((1.0, 0.0)), fl.sine(axis=1, amp=1.0, freq=0.9, dim=2)), None),
        ("sum", fl.Constant(2.0, dim=2) + fl.RadialPoly((0.0, 1.0), (0.0, 0.0)), None),
    ]


def _sample_points(exclude_radius, n=60, seed=3):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-0.45, 0.45, size=(3 * n, 2))
    if exclude_radius:
        pts = pts + np.array([0.8, 0.0])  # shift away from the singular center
    return pts[:n]


@pytest.mark.parametrize("name,field,excl", _field_cases())
def test_gradient_matches_finite_differences_order2(name, field, excl):
    pts = _sample_points(excl)
    errs = []
    for h in (1e-3, 5e-4):
        fd = np.zeros_like(pts)
        for ax in range(2):
            e = np.zeros(2)
            e[ax] = h
            fd[:, ax] = (field(pts + e) - field(pts - e)) / (2 * h)
        errs.append(np.max(np.abs(fd - field.grad(pts))))
    # observed order under h-halving, guarding the rounding floor
    if errs[0] > 1e-11:
        order = np.log2(errs[0] / max(errs[1], 1e-16))
        assert order > 1.9 or errs[1] < 1e-10, (name, errs)
    assert errs[1] < 1e-4


@pytest.mark.parametrize("name,field,excl", _field_cases())
def test_laplacian_matches_finite_differences(name, field, excl):
    pts = _sample_points(excl)
    h = 1e-4
    fd = np.zeros(len(pts))
    f0 = field(pts)
    for ax in range(2):
        e = np.zeros(2)
        e[ax] = h
        fd += (field(pts + e) - 2 * f0 + field(pts - e)) / h**2
    assert np.max(np.abs(fd - field.laplacian(pts))) < 5e-4


def test_gamma_is_squared_gradient():
    f = fl.sine(axis=0, amp=2.0, freq=1.5, dim=2)
    pts = _sample_points(None)
    g = f.grad(pts)
    assert np.allclose(f.gamma(pts), np.sum(g * g, axis=-1))


def test_log_radial_singularity():
    f = fl.LogRadial((0.0, 0.0), 1.0)
    with pytest.raises(SingularityError):
        f(np.array([[0.0, 0.0]]))


def test_convexification_weight_values():
    bc = geo.BallComplement((0.0, 0.0), 1.0)
    psi = cf.convexification_weight(bc, -1.0, 0.01)
    # inside the removed ball V = 0.5: psi = (0.01 + 1) * 0.5
    assert psi(np.array([[0.5, 0.0]]))[0] == pytest.approx(0.505)
    # on the boundary psi = 0 regardless of ell, eps
    for eps in (0.01, 0.5, 2.0):
        w = cf.convexification_weight(bc, -3.0, eps)
        assert abs(w(np.array([[1.0, 0.0]]))[0]) < 1e-14
    # ell = 0, eps = 1 reduces to V itself
    w2 = cf.convexification_weight(bc, 0.0, 1.0)
    pts = _sample_points(0.3)
    assert np.allclose(w2(pts), bc.signed_distance(pts))


def test_convexification_requires_positive_eps():
    bc = geo.BallComplement((0.0, 0.0), 1.0)
    with pytest.raises(InvalidParameterError):
        cf.convexification_weight(bc, -1.0, 0.0)


def test_cantor_profile_structure():
    prof = fl.CantorProfile(3)
    lo, hi = prof.gap_intervals()
    assert len(lo) == 2**3 - 1
    # removed intervals are disjoint and ordered
    assert np.all(hi[:-1] <= lo[1:] + 1e-15)
    # level-1 gap is the middle third
    i = np.argmax(hi - lo)
    assert lo[i] == pytest.approx(1 / 3)
    assert hi[i] == pytest.approx(2 / 3)
    # values vanish outside the gaps
    ts = np.array([0.0, 1 / 3 - 1e-9, 2 / 3 + 1e-9, 0.999])
    assert np.allclose(prof.value(ts), 0.0)


def test_cantor_gap_edges_have_no_bleed():
    # a point just inside a level-1 gap edge must use the level-1 bump,
    # not a nearby deeper-level one
    prof = fl.CantorProfile(4)
    t = 1 / 3 + 1e-9
    assert abs(prof.value(np.array([t]))[0]) < 1e-12
    assert abs(prof.d1(np.array([t]))[0]) < 1e-6
    # second derivative approaches the scaled bump edge value 2 pi^2 * 3
    assert prof.d2(np.array([t]))[0] == pytest.approx(3 * 2 * np.pi**2, rel=1e-5)


def test_cantor_depth_zero_and_depth_limit():
    prof = fl.CantorProfile(0)
    ts = np.linspace(0, 1, 17)
    assert np.allclose(prof.value(ts), 0.0)
    with pytest.raises(InvalidParameterError):
        fl.CantorProfile(13)


def test_septic_well_boundary_smoothness():
    eta = fl.SeptichWell()
    for t in (1.0, -1.0):
        assert eta.value(np.array([t]))[0] == pytest.approx(0.0, abs=1e-14)
        assert eta.d1(np.array([t]))[0] == pytest.approx(0.0, abs=1e-12)
        assert eta.d2(np.array([t]))[0] == pytest.approx(0.0, abs=1e-12)


def test_field_dim_mismatch_raises():
    f = fl.Constant(1.0, dim=2)
    with pytest.raises(InvalidParameterError):
        f(np.zeros((4, 3)))
    with pytest.raises(InvalidParameterError):
        fl.FieldSum(fl.Constant(0.0, dim=1), fl.Constant(0.0, dim=2))
