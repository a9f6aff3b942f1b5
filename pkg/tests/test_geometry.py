import numpy as np
import pytest

from heatbounds import geometry as geo
from heatbounds.errors import InvalidParameterError, SingularityError, UnsupportedGeometryError

DOMAINS = [
    geo.Interval(0.0, np.pi),
    geo.Box((0.0, -1.0), (2.0, 1.0)),
    geo.Ball((0.3, -0.2), 0.7),
    geo.BallComplement((0.0, 0.0), 1.0),
    geo.HalfSpace(0, 0.0, dim=2),
    geo.Ball((0.0, 0.0, 0.0), 1.0),
]


def test_signed_distance_ball_center_and_outside():
    ball = geo.Ball((0.0, 0.0), 1.0)
    assert ball.signed_distance(np.array([[0.0, 0.0]]))[0] == -1.0
    assert ball.signed_distance(np.array([[2.0, 0.0]]))[0] == 1.0


def test_signed_distance_halfspace():
    hs = geo.HalfSpace(0, 0.0, dim=2)
    assert hs.signed_distance(np.array([[0.3, 5.0]]))[0] == pytest.approx(-0.3)


def test_signed_distance_box_inside_outside():
    box = geo.Box((0.0, 0.0), (2.0, 1.0))
    assert box.signed_distance(np.array([[0.25, 0.5]]))[0] == pytest.approx(-0.25)
    # outside a corner: Euclidean distance to the corner
    d = box.signed_distance(np.array([[3.0, 2.0]]))[0]
    assert d == pytest.approx(np.hypot(1.0, 1.0))


def _random_nonsingular(domain, rng, n):
    pts = rng.uniform(-2.5, 2.5, size=(4 * n, domain.dim))
    if isinstance(domain, (geo.Ball, geo.BallComplement)):
        rho = np.linalg.norm(pts - np.asarray(domain.center), axis=1)
        pts = pts[rho > 1e-3]
    if isinstance(domain, geo.Interval):
        pts = pts[np.abs(pts[:, 0] - (domain.a + domain.b) / 2) > 1e-3]
    if isinstance(domain, geo.Box):
        q = domain._axis_excess(pts)
        top2 = np.sort(q, axis=1)
        keep = np.abs(top2[:, -1] - top2[:, -2]) > 1e-3
        keep &= np.abs(pts - (np.asarray(domain.lo) + np.asarray(domain.hi)) / 2).min(axis=1) > 1e-3
        pts = pts[keep]
    return pts[:n]


@pytest.mark.parametrize("domain", DOMAINS)
def test_eikonal_equation(domain):
    rng = np.random.default_rng(5)
    pts = _random_nonsingular(domain, rng, 10_000)
    grad = domain.sd_gradient(pts)
    assert np.max(np.abs(np.linalg.norm(grad, axis=-1) - 1.0)) < 1e-10


@pytest.mark.parametrize("domain", DOMAINS)
def test_sd_derivatives_match_finite_differences(domain):
    rng = np.random.default_rng(11)
    pts = _random_nonsingular(domain, rng, 200)
    h = 1e-5
    grad = domain.sd_gradient(pts)
    lap = domain.sd_laplacian(pts)
    fd_grad = np.zeros_like(pts)
    fd_lap = np.zeros(len(pts))
    for ax in range(domain.dim):
        e = np.zeros(domain.dim)
        e[ax] = h
        vp = domain.signed_distance(pts + e)
        vm = domain.signed_distance(pts - e)
        v0 = domain.signed_distance(pts)
        fd_grad[:, ax] = (vp - vm) / (2 * h)
        fd_lap += (vp - 2 * v0 + vm) / h**2
    # keep points whose finite-difference stencil stays on one smooth branch
    ok = np.abs(np.linalg.norm(fd_grad, axis=-1) - 1.0) < 1e-6
    assert ok.mean() > 0.8
    assert np.max(np.abs(grad[ok] - fd_grad[ok])) < 1e-6
    assert np.max(np.abs(lap[ok] - fd_lap[ok])) < 1e-3


def test_ball_laplacian_closed_form():
    for dim in (2, 3):
        ball = geo.Ball((0.0,) * dim, 1.0)
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(100, dim))
        rho = np.linalg.norm(pts, axis=1)
        assert np.allclose(ball.sd_laplacian(pts), (dim - 1) / rho)


def test_reflect_into_examples():
    ball = geo.Ball((0.0, 0.0), 1.0)
    proj, push, normal = ball.project(np.array([[1.2, 0.0]]))
    assert np.allclose(proj[0], [1.0, 0.0])
    assert push[0] == pytest.approx(0.2)
    assert np.allclose(normal[0], [-1.0, 0.0])

    proj, push, _ = ball.project(np.array([[0.5, 0.0]]))
    assert push[0] == 0.0
    assert np.allclose(proj[0], [0.5, 0.0])

    hs = geo.HalfSpace(0, 0.0, dim=2)
    proj, push, normal = hs.project(np.array([[-0.1, 3.0]]))
    assert np.allclose(proj[0], [0.0, 3.0])
    assert push[0] == pytest.approx(0.1)
    assert np.allclose(normal[0], [1.0, 0.0])


@pytest.mark.parametrize("domain", DOMAINS)
def test_reflect_idempotent(domain):
    rng = np.random.default_rng(7)
    pts = rng.uniform(-2.0, 2.0, size=(500, domain.dim))
    if isinstance(domain, geo.BallComplement):
        pts = pts[np.linalg.norm(pts - np.asarray(domain.center), axis=1) > 1e-6]
    proj, _, _ = domain.project(pts)
    _, push2, _ = domain.project(proj)
    assert np.max(push2) <= 1e-12
    assert np.all(domain.signed_distance(proj) <= 1e-12)


def test_singularity_errors():
    ball = geo.Ball((0.0, 0.0), 1.0)
    with pytest.raises(SingularityError):
        ball.sd_gradient(np.array([[0.0, 0.0]]))
    bc = geo.BallComplement((0.0, 0.0), 1.0)
    with pytest.raises(SingularityError):
        bc.project(np.array([[0.0, 0.0]]))
    iv = geo.Interval(0.0, 2.0)
    with pytest.raises(SingularityError):
        iv.sd_gradient(np.array([[1.0]]))
    box = geo.Box((0.0, 0.0), (1.0, 1.0))
    with pytest.raises(SingularityError):
        box.sd_gradient(np.array([[0.5, 0.5]]))


def test_boundary_curvature_bounds():
    assert geo.boundary_curvature_bound(geo.Ball((0.0, 0.0), 0.5)).value == pytest.approx(2.0)
    assert geo.boundary_curvature_bound(geo.BallComplement((0.0, 0.0), 0.5)).value == pytest.approx(-2.0)
    assert geo.boundary_curvature_bound(geo.HalfSpace(0, 0.0)).value == 0.0
    assert geo.boundary_curvature_bound(geo.Box((0, 0), (1, 1))).value == 0.0
    with pytest.raises(UnsupportedGeometryError):
        geo.boundary_curvature_bound("not a domain")


def test_comparison_potential():
    z = np.zeros(2)
    assert geo.comparison_potential(1.0, z, 0.0, z) == pytest.approx(0.5)
    assert geo.comparison_potential(1.0, z, 0.0, np.array([1.0, 0.0])) == pytest.approx(0.0)
    val = geo.comparison_potential(np.pi / 4, z, 1.0, z)
    assert val == pytest.approx((1 - np.cos(np.pi / 4)) / np.sin(np.pi / 4), abs=1e-10)
    assert val == pytest.approx(np.sqrt(2) - 1, abs=1e-10)
    with pytest.raises(InvalidParameterError):
        geo.comparison_potential(-1.0, z, 0.0, z)
    # sign/zero set: negative outside the ball, positive inside
    assert geo.comparison_potential(1.0, z, 0.0, np.array([2.0, 0.0])) < 0
    assert geo.comparison_potential(1.0, z, -1.0, z) > 0


def test_invalid_domains():
    with pytest.raises(InvalidParameterError):
        geo.Interval(1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        geo.Ball((0.0, 0.0), -1.0)
    with pytest.raises(InvalidParameterError):
        geo.Box((0.0, 0.0), (1.0, -1.0))
