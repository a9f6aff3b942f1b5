"""Domains with closed-form signed distance functions.

Every domain Y is a closed subset of R^n carrying the signed distance
V = d(., Y) - d(., complement): V < 0 strictly inside, V = 0 on the
boundary, V > 0 outside.  Gradients and Laplacians of V are closed-form
away from declared singular sets (ball centers, box/interval skeletons);
queries there raise SingularityError instead of returning NaN.

All objects are immutable after construction and safe to share across
threads.  Point arguments are numpy arrays of shape (n,) or batches of
shape (..., n); scalar outputs follow the leading batch shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, SingularityError, UnsupportedGeometryError

_SINGULAR_RADIUS = 1e-12


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise InvalidParameterError(
            f"expected points with last axis {dim}, got shape {x.shape}"
        )
    return x


class Domain:
    """Base class; concrete kinds implement the V-oracles and projection."""

    dim: int

    def signed_distance(self, x):
        raise NotImplementedError

    def sd_gradient(self, x):
        raise NotImplementedError

    def sd_laplacian(self, x):
        raise NotImplementedError

    def project(self, x):
        """Nearest point of Y, push magnitude V(x)^+, and inward unit normal.

        For points already in Y the push is 0 and the normal row is zero.
        """
        raise NotImplementedError

    def singular_mask(self, x):
        """Boolean mask of points where projection/derivatives are undefined."""
        x = _as_points(x, self.dim)
        return np.zeros(x.shape[:-1], dtype=bool)

    def contains(self, x, tol=0.0):
        return self.signed_distance(x) <= tol

    def boundary_curvature_bound(self):
        """Constant lower bound for the curvature of the boundary."""
        raise UnsupportedGeometryError(
            f"no boundary curvature bound for {type(self).__name__}"
        )


@dataclass(frozen=True)
class Interval(Domain):
    """Closed interval [a, b] as a 1-d domain."""

    a: float
    b: float
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidParameterError(f"need a < b, got [{self.a}, {self.b}]")

    def signed_distance(self, x):
        x = _as_points(x, 1)[..., 0]
        return np.maximum(self.a - x, x - self.b)

    def sd_gradient(self, x):
        x = _as_points(x, 1)
        left = self.a - x[..., 0]
        right = x[..., 0] - self.b
        if np.any(np.abs(left - right) < _SINGULAR_RADIUS):
            raise SingularityError("gradient query on the interval midpoint")
        return np.where(left > right, -1.0, 1.0)[..., None]

    def sd_laplacian(self, x):
        x = _as_points(x, 1)
        return np.zeros(x.shape[:-1])

    def project(self, x):
        x = _as_points(x, 1)
        proj = np.clip(x, self.a, self.b)
        push = np.linalg.norm(x - proj, axis=-1)
        normal = np.zeros_like(x)
        out = push > 0
        normal[out] = (proj[out] - x[out]) / push[out][..., None]
        return proj, push, normal

    def boundary_curvature_bound(self):
        from .fields import Constant

        return Constant(0.0, dim=1)


@dataclass(frozen=True)
class Box(Domain):
    """Axis-aligned box prod_i [lo_i, hi_i]."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise InvalidParameterError("need lo_i < hi_i per axis")
        object.__setattr__(self, "dim", len(lo))

    def _axis_excess(self, x):
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.maximum(lo - x, x - hi)

    def signed_distance(self, x):
        x = _as_points(x, self.dim)
        q = self._axis_excess(x)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return np.where(outside > 0, outside, inside)

    def sd_gradient(self, x):
        x = _as_points(x, self.dim)
        q = self._axis_excess(x)
        v = self.signed_distance(x)
        grad = np.zeros_like(x)
        out = v > 0
        if np.any(out):
            qp = np.maximum(q[out], 0.0)
            grad_out = qp * np.sign(x[out] - (np.asarray(self.lo) + np.asarray(self.hi)) / 2)
            grad[out] = grad_out / v[out][..., None]
        ins = ~out
        if np.any(ins):
            qi = q[ins]
            order = np.sort(qi, axis=-1)
            if qi.shape[-1] > 1 and np.any(order[..., -1] - order[..., -2] < _SINGULAR_RADIUS):
                raise SingularityError("gradient query on the box skeleton")
            j = qi.argmax(axis=-1)
            rows = np.zeros_like(qi)
            mid = (np.asarray(self.lo) + np.asarray(self.hi)) / 2
            sgn = np.sign(x[ins] - mid)
            top = np.take_along_axis(sgn, j[..., None], -1)
            if np.any(top == 0):
                raise SingularityError("gradient query on the box skeleton")
            np.put_along_axis(rows, j[..., None], top, -1)
            grad[ins] = rows
        return grad

    def sd_laplacian(self, x):
        x = _as_points(x, self.dim)
        q = self._axis_excess(x)
        v = self.signed_distance(x)
        lap = np.zeros(x.shape[:-1])
        out = v > 0
        if np.any(out):
            m = (q[out] > 0).sum(axis=-1)
            lap[out] = (m - 1) / v[out]
        return lap

    def project(self, x):
        x = _as_points(x, self.dim)
        proj = np.clip(x, np.asarray(self.lo), np.asarray(self.hi))
        push = np.linalg.norm(x - proj, axis=-1)
        normal = np.zeros_like(x)
        outside = push > 0
        normal[outside] = (proj[outside] - x[outside]) / push[outside][..., None]
        return proj, push, normal

    def boundary_curvature_bound(self):
        from .fields import Constant

        return Constant(0.0, dim=self.dim)


@dataclass(frozen=True)
class Ball(Domain):
    """Closed ball of radius r around z."""

    center: tuple
    radius: float

    def __post_init__(self):
        center = tuple(float(v) for v in self.center)
        object.__setattr__(self, "center", center)
        if self.radius <= 0:
            raise InvalidParameterError("ball radius must be positive")
        object.__setattr__(self, "dim", len(center))

    def _rho(self, x):
        return np.linalg.norm(x - np.asarray(self.center), axis=-1)

    def signed_distance(self, x):
        return self._rho(_as_points(x, self.dim)) - self.radius

    def singular_mask(self, x):
        return self._rho(_as_points(x, self.dim)) < _SINGULAR_RADIUS

    def _check_center(self, rho):
        if np.any(rho < _SINGULAR_RADIUS):
            raise SingularityError("query at the ball center")

    def sd_gradient(self, x):
        x = _as_points(x, self.dim)
        rho = self._rho(x)
        self._check_center(rho)
        return (x - np.asarray(self.center)) / rho[..., None]

    def sd_laplacian(self, x):
        x = _as_points(x, self.dim)
        rho = self._rho(x)
        self._check_center(rho)
        return (self.dim - 1) / rho

    def project(self, x):
        x = _as_points(x, self.dim)
        rho = self._rho(x)
        push = np.maximum(rho - self.radius, 0.0)
        proj = np.where(
            (rho > self.radius)[..., None],
            np.asarray(self.center) + self.radius * (x - np.asarray(self.center)) / np.maximum(rho, _SINGULAR_RADIUS)[..., None],
            x,
        )
        normal = np.zeros_like(x)
        out = push > 0
        normal[out] = (proj[out] - x[out]) / push[out][..., None]
        return proj, push, normal

    def boundary_curvature_bound(self):
        from .fields import Constant

        return Constant(1.0 / self.radius, dim=self.dim)


@dataclass(frozen=True)
class BallComplement(Domain):
    """Complement of the open ball: Y = {|x - z| >= r}."""

    center: tuple
    radius: float

    def __post_init__(self):
        center = tuple(float(v) for v in self.center)
        object.__setattr__(self, "center", center)
        if self.radius <= 0:
            raise InvalidParameterError("ball radius must be positive")
        object.__setattr__(self, "dim", len(center))

    def _rho(self, x):
        return np.linalg.norm(x - np.asarray(self.center), axis=-1)

    def signed_distance(self, x):
        return self.radius - self._rho(_as_points(x, self.dim))

    def singular_mask(self, x):
        return self._rho(_as_points(x, self.dim)) < _SINGULAR_RADIUS

    def sd_gradient(self, x):
        x = _as_points(x, self.dim)
        rho = self._rho(x)
        if np.any(rho < _SINGULAR_RADIUS):
            raise SingularityError("query at the removed-ball center")
        return -(x - np.asarray(self.center)) / rho[..., None]

    def sd_laplacian(self, x):
        x = _as_points(x, self.dim)
        rho = self._rho(x)
        if np.any(rho < _SINGULAR_RADIUS):
            raise SingularityError("query at the removed-ball center")
        return -(self.dim - 1) / rho

    def project(self, x):
        x = _as_points(x, self.dim)
        rho = self._rho(x)
        if np.any(rho < _SINGULAR_RADIUS):
            raise SingularityError("projection undefined at the removed-ball center")
        push = np.maximum(self.radius - rho, 0.0)
        proj = np.where(
            (rho < self.radius)[..., None],
            np.asarray(self.center) + self.radius * (x - np.asarray(self.center)) / rho[..., None],
            x,
        )
        normal = np.zeros_like(x)
        out = push > 0
        normal[out] = (proj[out] - x[out]) / push[out][..., None]
        return proj, push, normal

    def boundary_curvature_bound(self):
        from .fields import Constant

        return Constant(-1.0 / self.radius, dim=self.dim)


@dataclass(frozen=True)
class HalfSpace(Domain):
    """Y = {x: x[axis] >= level} in R^dim."""

    axis: int
    level: float
    dim: int = 2

    def __post_init__(self):
        if not 0 <= self.axis < self.dim:
            raise InvalidParameterError("half-space axis out of range")

    def signed_distance(self, x):
        x = _as_points(x, self.dim)
        return self.level - x[..., self.axis]

    def sd_gradient(self, x):
        x = _as_points(x, self.dim)
        g = np.zeros_like(x)
        g[..., self.axis] = -1.0
        return g

    def sd_laplacian(self, x):
        x = _as_points(x, self.dim)
        return np.zeros(x.shape[:-1])

    def project(self, x):
        x = _as_points(x, self.dim)
        proj = x.copy()
        deficit = self.level - x[..., self.axis]
        push = np.maximum(deficit, 0.0)
        proj[..., self.axis] = np.maximum(x[..., self.axis], self.level)
        normal = np.zeros_like(x)
        normal[push > 0, self.axis] = 1.0
        return proj, push, normal

    def boundary_curvature_bound(self):
        from .fields import Constant

        return Constant(0.0, dim=self.dim)


def signed_distance(domain, x):
    """V(x) with the convention V < 0 inside Y, V > 0 outside."""
    return domain.signed_distance(x)


def reflect_into(domain, x):
    """Skorokhod projection step: nearest point, push magnitude, inward normal."""
    return domain.project(x)


def boundary_curvature_bound(domain):
    """Constant field ell bounding the boundary curvature from below.

    +1/r for a ball, -1/r for a ball complement, 0 for flat boundaries
    (half-space, box faces, interval endpoints); Euclidean base space only.
    """
    if not isinstance(domain, Domain):
        raise UnsupportedGeometryError(f"not a domain: {domain!r}")
    return domain.boundary_curvature_bound()


def comparison_potential(r, z, K, x):
    """Model comparison potential V_{r,z} around z at curvature K.

    K = 0: (r^2 - |x-z|^2) / (2r).  The K != 0 branches are evaluated as
    formulas only; all verified claims in this package instantiate K = 0.
    Zero set of the K = 0 branch is the sphere of radius r; V > 0 inside.
    """
    if r <= 0:
        raise InvalidParameterError("comparison radius must be positive")
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    d = np.linalg.norm(x - z, axis=-1)
    if K == 0:
        return (r * r - d * d) / (2 * r)
    if K > 0:
        sk = np.sqrt(K)
        if sk * r >= np.pi:
            raise InvalidParameterError("radius beyond the K>0 model cut locus")
        return (np.cos(sk * d) - np.cos(sk * r)) / (sk * np.sin(sk * r))
    sk = np.sqrt(-K)
    return (np.cosh(sk * r) - np.cosh(sk * d)) / (sk * np.sinh(sk * r))
