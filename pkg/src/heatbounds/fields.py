"""Analytic scalar fields with closed-form gradient and Laplacian oracles.

Fields carry their own derivatives instead of relying on automatic or
numeric differentiation: every field the checks need (constants, linear
ramps, axis trigs, radial polynomials, log-radial conformal weights,
convexification weights (eps - ell) * V, Cantor-type bump sums) has an
explicit gradient and Laplacian.  Derivative queries on declared singular
sets raise; they never return NaN silently.

Conventions: a field f maps points of shape (..., n) to values of shape
(...,); f.grad returns (..., n), f.laplacian returns (...,).  Calling the
field evaluates it.  Fields are immutable and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, SingularityError

_EPS = 1e-12


class ScalarField:
    dim: int

    def __call__(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def laplacian(self, x):
        raise NotImplementedError

    def gamma(self, x):
        """Carre du champ |grad|^2."""
        g = self.grad(x)
        return np.sum(g * g, axis=-1)

    def __add__(self, other):
        return FieldSum(self, _coerce(other, self.dim))

    def __radd__(self, other):
        return FieldSum(_coerce(other, self.dim), self)

    def __sub__(self, other):
        return FieldSum(self, Scaled(_coerce(other, self.dim), -1.0))

    def __rsub__(self, other):
        return FieldSum(_coerce(other, self.dim), Scaled(self, -1.0))

    def __mul__(self, c):
        if isinstance(c, ScalarField):
            return FieldProduct(self, c)
        return Scaled(self, float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return Scaled(self, -1.0)


def _coerce(value, dim):
    if isinstance(value, ScalarField):
        return value
    return Constant(float(value), dim=dim)


def _pts(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise InvalidParameterError(
            f"expected points with last axis {dim}, got shape {x.shape}"
        )
    return x


@dataclass(frozen=True)
class Constant(ScalarField):
    value: float
    dim: int = 1

    def __call__(self, x):
        x = _pts(x, self.dim)
        return np.full(x.shape[:-1], self.value)

    def grad(self, x):
        return np.zeros_like(_pts(x, self.dim))

    def laplacian(self, x):
        x = _pts(x, self.dim)
        return np.zeros(x.shape[:-1])


@dataclass(frozen=True)
class Linear(ScalarField):
    """a . x + b"""

    coeffs: tuple
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "dim", len(self.coeffs))

    def __call__(self, x):
        x = _pts(x, self.dim)
        return x @ np.asarray(self.coeffs) + self.offset

    def grad(self, x):
        x = _pts(x, self.dim)
        return np.broadcast_to(np.asarray(self.coeffs), x.shape).copy()

    def laplacian(self, x):
        x = _pts(x, self.dim)
        return np.zeros(x.shape[:-1])


@dataclass(frozen=True)
class AxisTrig(ScalarField):
    """amp * sin(freq * x[axis] + phase); a cosine is phase = pi/2."""

    axis: int = 0
    amp: float = 1.0
    freq: float = 1.0
    phase: float = 0.0
    dim: int = 1

    def _arg(self, x):
        return self.freq * x[..., self.axis] + self.phase

    def __call__(self, x):
        x = _pts(x, self.dim)
        return self.amp * np.sin(self._arg(x))

    def grad(self, x):
        x = _pts(x, self.dim)
        g = np.zeros_like(x)
        g[..., self.axis] = self.amp * self.freq * np.cos(self._arg(x))
        return g

    def laplacian(self, x):
        x = _pts(x, self.dim)
        return -self.amp * self.freq**2 * np.sin(self._arg(x))


def cosine(axis=0, amp=1.0, freq=1.0, dim=1):
    return AxisTrig(axis=axis, amp=amp, freq=freq, phase=np.pi / 2, dim=dim)


def sine(axis=0, amp=1.0, freq=1.0, dim=1):
    return AxisTrig(axis=axis, amp=amp, freq=freq, phase=0.0, dim=dim)


@dataclass(frozen=True)
class RadialPoly(ScalarField):
    """p(|x - z|^2) for a polynomial p -- smooth everywhere, radial.

    coeffs are in increasing powers of s = |x - z|^2.
    grad = 2 p'(s) (x - z);  laplacian = 4 s p''(s) + 2 n p'(s).
    """

    coeffs: tuple
    center: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "dim", len(self.center))

    def _s(self, x):
        d = x - np.asarray(self.center)
        return np.sum(d * d, axis=-1), d

    def _p(self, s, order):
        c = np.polynomial.polynomial.polyder(self.coeffs, order) if order else self.coeffs
        return np.polynomial.polynomial.polyval(s, c)

    def __call__(self, x):
        s, _ = self._s(_pts(x, self.dim))
        return self._p(s, 0)

    def grad(self, x):
        s, d = self._s(_pts(x, self.dim))
        return 2.0 * self._p(s, 1)[..., None] * d

    def laplacian(self, x):
        s, _ = self._s(_pts(x, self.dim))
        return 4.0 * s * self._p(s, 2) + 2.0 * self.dim * self._p(s, 1)


@dataclass(frozen=True)
class LogRadial(ScalarField):
    """-log(|x - z| / r0): the conformal weight that flattens circles around z.

    Harmonic in dimension 2.  Singular at the center z.
    """

    center: tuple
    r0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.r0 <= 0:
            raise InvalidParameterError("reference radius must be positive")
        object.__setattr__(self, "dim", len(self.center))

    def _d(self, x):
        d = x - np.asarray(self.center)
        rho = np.linalg.norm(d, axis=-1)
        if np.any(rho < _EPS):
            raise SingularityError("log-radial field evaluated at its center")
        return d, rho

    def __call__(self, x):
        _, rho = self._d(_pts(x, self.dim))
        return -np.log(rho / self.r0)

    def grad(self, x):
        d, rho = self._d(_pts(x, self.dim))
        return -d / (rho * rho)[..., None]

    def laplacian(self, x):
        _, rho = self._d(_pts(x, self.dim))
        return -(self.dim - 2) / (rho * rho)


@dataclass(frozen=True)
class ComparisonPotentialField(ScalarField):
    """(r^2 - |x - z|^2) / (2r): the flat-model comparison potential.

    Positive inside the ball of radius r around z, zero on its sphere.
    """

    r: float
    center: tuple

    def __post_init__(self):
        if self.r <= 0:
            raise InvalidParameterError("comparison radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "dim", len(self.center))

    def __call__(self, x):
        x = _pts(x, self.dim)
        d = x - np.asarray(self.center)
        return (self.r**2 - np.sum(d * d, axis=-1)) / (2 * self.r)

    def grad(self, x):
        x = _pts(x, self.dim)
        return -(x - np.asarray(self.center)) / self.r

    def laplacian(self, x):
        x = _pts(x, self.dim)
        return np.full(x.shape[:-1], -self.dim / self.r)


@dataclass(frozen=True)
class SignedDistanceField(ScalarField):
    """The domain's signed distance V as a field."""

    domain: object

    def __post_init__(self):
        object.__setattr__(self, "dim", self.domain.dim)

    def __call__(self, x):
        return self.domain.signed_distance(x)

    def grad(self, x):
        return self.domain.sd_gradient(x)

    def laplacian(self, x):
        return self.domain.sd_laplacian(x)


@dataclass(frozen=True)
class FieldSum(ScalarField):
    left: ScalarField
    right: ScalarField

    def __post_init__(self):
        if self.left.dim != self.right.dim:
            raise InvalidParameterError("field dims differ")
        object.__setattr__(self, "dim", self.left.dim)

    def __call__(self, x):
        return self.left(x) + self.right(x)

    def grad(self, x):
        return self.left.grad(x) + self.right.grad(x)

    def laplacian(self, x):
        return self.left.laplacian(x) + self.right.laplacian(x)


@dataclass(frozen=True)
class Scaled(ScalarField):
    inner: ScalarField
    factor: float

    def __post_init__(self):
        object.__setattr__(self, "dim", self.inner.dim)

    def __call__(self, x):
        return self.factor * self.inner(x)

    def grad(self, x):
        return self.factor * self.inner.grad(x)

    def laplacian(self, x):
        return self.factor * self.inner.laplacian(x)


@dataclass(frozen=True)
class FieldProduct(ScalarField):
    """f * g with product-rule derivatives."""

    left: ScalarField
    right: ScalarField

    def __post_init__(self):
        if self.left.dim != self.right.dim:
            raise InvalidParameterError("field dims differ")
        object.__setattr__(self, "dim", self.left.dim)

    def __call__(self, x):
        return self.left(x) * self.right(x)

    def grad(self, x):
        return (
            self.left(x)[..., None] * self.right.grad(x)
            + self.right(x)[..., None] * self.left.grad(x)
        )

    def laplacian(self, x):
        cross = np.sum(self.left.grad(x) * self.right.grad(x), axis=-1)
        return (
            self.left(x) * self.right.laplacian(x)
            + self.right(x) * self.left.laplacian(x)
            + 2.0 * cross
        )


@dataclass(frozen=True)
class ExpOf(ScalarField):
    """e^g: grad = e^g grad g; laplacian = e^g (lap g + |grad g|^2)."""

    inner: ScalarField

    def __post_init__(self):
        object.__setattr__(self, "dim", self.inner.dim)

    def __call__(self, x):
        return np.exp(self.inner(x))

    def grad(self, x):
        return np.exp(self.inner(x))[..., None] * self.inner.grad(x)

    def laplacian(self, x):
        return np.exp(self.inner(x)) * (self.inner.laplacian(x) + self.inner.gamma(x))


# ---------------------------------------------------------------------------
# 1-d profiles: building blocks for separable fields and bump constructions.


class Profile:
    """Scalar function of one variable with two derivatives."""

    def value(self, t):
        raise NotImplementedError

    def d1(self, t):
        raise NotImplementedError

    def d2(self, t):
        raise NotImplementedError


class CosSqBump(Profile):
    """cos^2(pi t) on |t| <= 1/2, zero outside; C^1, piecewise-C^2.

    |d2| integrates to 4 pi over the support.
    """

    support = 0.5

    def _mask(self, t):
        return np.abs(t) <= 0.5

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(self._mask(t), np.cos(np.pi * t) ** 2, 0.0)

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(self._mask(t), -np.pi * np.sin(2 * np.pi * t), 0.0)

    def d2(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(self._mask(t), -2 * np.pi**2 * np.cos(2 * np.pi * t), 0.0)

    def sup_value(self):
        return 1.0

    def sup_d1(self):
        return np.pi

    def abs_d2_integral_exact(self):
        return 4 * np.pi


class SeptichWell(Profile):
    """(t^2 - 1)^3 t on [-1, 1], zero outside; C^2 across the edges."""

    def _mask(self, t):
        return np.abs(t) <= 1.0

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(self._mask(t), (t * t - 1) ** 3 * t, 0.0)

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(self._mask(t), (t * t - 1) ** 2 * (7 * t * t - 1), 0.0)

    def d2(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(self._mask(t), 6 * t * (t * t - 1) * (7 * t * t - 3), 0.0)


def cantor_gap_centers(levels):
    """Centers of the removed middle-third intervals, grouped by level.

    Level n (1-based) removes 2^(n-1) intervals of length 3^-n.
    """
    out = []
    intervals = [(0.0, 1.0)]
    for _ in range(levels):
        centers = [(a + b) / 2 for a, b in intervals]
        out.append(np.array(centers))
        nxt = []
        for a, b in intervals:
            third = (b - a) / 3
            nxt.append((a, a + third))
            nxt.append((b - third, b))
        intervals = nxt
    return out


class CantorProfile(Profile):
    """Sum over Cantor-gap centers of 3^-n bump(3^n (t - c)).

    Supports of all summands are the (disjoint) removed intervals, so at
    most one term is active at any t; evaluation locates it by bisection
    on the merged center list.
    """

    def __init__(self, j, bump=None):
        if j < 0 or j > 12:
            raise InvalidParameterError("cantor depth j must be in 0..12")
        self.j = int(j)
        self.bump = bump if bump is not None else CosSqBump()
        support = getattr(self.bump, "support", None)
        if support is None or support > 0.5:
            raise InvalidParameterError(
                "bump must declare a support half-width <= 1/2"
            )
        per_level = cantor_gap_centers(self.j)
        centers = []
        scales = []
        for n, cs in enumerate(per_level, start=1):
            centers.append(cs)
            scales.append(np.full(cs.shape, 3.0**n))
        if centers:
            merged = np.concatenate(centers)
            scales = np.concatenate(scales)
            order = np.argsort(merged)
            self._centers = merged[order]
            self._scales = scales[order]
        else:
            self._centers = np.zeros(0)
            self._scales = np.zeros(0)
        # gap supports are disjoint: locate by containing interval
        self._lo = self._centers - 0.5 / np.maximum(self._scales, 1.0)
        self._hi = self._centers + 0.5 / np.maximum(self._scales, 1.0)

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        if self._centers.size == 0:
            return t, np.zeros(t.shape, dtype=bool), np.ones(t.shape)
        idx = np.searchsorted(self._lo, t, side="right") - 1
        idx_c = np.clip(idx, 0, self._centers.size - 1)
        active = (idx >= 0) & (t <= self._hi[idx_c])
        scale = self._scales[idx_c]
        u = np.where(active, scale * (t - self._centers[idx_c]), 1.0)
        return u, active, scale

    def value(self, t):
        u, active, scale = self._locate(t)
        return np.where(active, self.bump.value(u) / scale, 0.0)

    def d1(self, t):
        u, active, _ = self._locate(t)
        return np.where(active, self.bump.d1(u), 0.0)

    def d2(self, t):
        u, active, scale = self._locate(t)
        return np.where(active, scale * self.bump.d2(u), 0.0)

    def gap_intervals(self):
        """(lo, hi) arrays of all removed intervals up to depth j."""
        half = 0.5 / self._scales
        return self._centers - half, self._centers + half


@dataclass(frozen=True)
class AxisProfileField(ScalarField):
    """profile(x[axis]) as a field on R^dim."""

    profile: Profile
    axis: int = 0
    dim: int = 1

    def __call__(self, x):
        x = _pts(x, self.dim)
        return self.profile.value(x[..., self.axis])

    def grad(self, x):
        x = _pts(x, self.dim)
        g = np.zeros_like(x)
        g[..., self.axis] = self.profile.d1(x[..., self.axis])
        return g

    def laplacian(self, x):
        x = _pts(x, self.dim)
        return self.profile.d2(x[..., self.axis])


@dataclass(frozen=True)
class Separable2D(ScalarField):
    """f(x0) * g(x1) on R^2 from two profiles."""

    fx: Profile
    fy: Profile
    dim: int = field(default=2, init=False)

    def __call__(self, x):
        x = _pts(x, 2)
        return self.fx.value(x[..., 0]) * self.fy.value(x[..., 1])

    def grad(self, x):
        x = _pts(x, 2)
        g = np.empty_like(x)
        g[..., 0] = self.fx.d1(x[..., 0]) * self.fy.value(x[..., 1])
        g[..., 1] = self.fx.value(x[..., 0]) * self.fy.d1(x[..., 1])
        return g

    def laplacian(self, x):
        x = _pts(x, 2)
        return self.fx.d2(x[..., 0]) * self.fy.value(x[..., 1]) + self.fx.value(
            x[..., 0]
        ) * self.fy.d2(x[..., 1])


def cantor_field(j, bump=None, dim=1, axis=0):
    """The depth-j Cantor-gap bump sum as a field on R^dim."""
    return AxisProfileField(CantorProfile(j, bump), axis=axis, dim=dim)
