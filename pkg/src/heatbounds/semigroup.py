"""Deterministic reference solvers: Neumann heat flow, Schrodinger semigroups,
discrete gradients, and spectral gaps.

Grids are structured (interval, box, polar disc, radial annulus) with
Neumann-consistent difference operators: row sums of the discrete Laplacian
vanish (constants are exact) and the operator is symmetric with respect to
the grid quadrature weights.  Time stepping is either a dense spectral
propagator (small grids; exact in time) or implicit Euler with Richardson
extrapolation and step control (unconditionally stable, no CFL artifacts).

Clock convention: these solvers use the semigroup clock, generator Delta.
Path-clock Monte Carlo at horizon t corresponds to semigroup time t/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidParameterError, SolverError

_DENSE_LIMIT = 4200


@dataclass
class GridFunction:
    """Values attached to a grid; the external CSV-facing pairing."""

    grid: object
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size != self.grid.size:
            raise InvalidParameterError("value count does not match grid size")

    def to_csv(self, path):
        coords = self.grid.nodes()
        data = np.column_stack([coords, self.values.reshape(-1)])
        header = ",".join([f"x{i+1}" for i in range(coords.shape[1])] + ["value"])
        np.savetxt(path, data, delimiter=",", header=header, comments="")


def _values(f):
    if isinstance(f, GridFunction):
        return f.values
    return np.asarray(f, dtype=float)


def _wrap_like(f, grid, values):
    if isinstance(f, GridFunction):
        return GridFunction(grid, values)
    return values


class Grid:
    """Base: nodes(), weights, laplacian_matrix(), size."""

    @property
    def size(self):
        return self.weights.size

    def integrate(self, u):
        return float(self.weights @ np.asarray(u).reshape(-1))

    def inner(self, u, v):
        return float(self.weights @ (np.asarray(u).reshape(-1) * np.asarray(v).reshape(-1)))


class IntervalGrid(Grid):
    """Vertex-centered uniform grid on [a, b] with mirror Neumann stencil."""

    def __init__(self, a, b, n):
        if n < 3 or b <= a:
            raise InvalidParameterError("need n >= 3 nodes and a < b")
        self.a, self.b, self.n = float(a), float(b), int(n)
        self.h = (b - a) / (n - 1)
        self.x = np.linspace(a, b, n)
        w = np.full(n, self.h)
        w[0] = w[-1] = self.h / 2
        self.weights = w
        self._cache = {}

    def nodes(self):
        return self.x[:, None]

    def laplacian_matrix(self, conductivity=None):
        """Tridiagonal Neumann Laplacian; optionally in flux form with a
        face conductivity w(x) (lumped-mass P1 discretization of
        (1/w) d/dx (w du/dx) when paired with weights w_i * h_i)."""
        n, h = self.n, self.h
        if conductivity is None:
            face = np.ones(n - 1)
        else:
            mid = (self.x[:-1] + self.x[1:]) / 2
            face = np.asarray(conductivity(mid[:, None]), dtype=float)
        lower = face / h**2
        diag = np.zeros(n)
        diag[:-1] -= face / h**2
        diag[1:] -= face / h**2
        L = sp.diags([lower, diag, lower], [-1, 0, 1], format="csr")
        # mirror rows at the ends double the single off-diagonal flux
        scale = np.ones(n)
        scale[0] = scale[-1] = 2.0
        L = sp.diags(scale) @ L
        if conductivity is not None:
            # generator of the w-weighted space: (1/w) d/dx (w du/dx)
            wnode = np.asarray(conductivity(self.x[:, None]), dtype=float)
            L = sp.diags(1.0 / wnode) @ L
        return L

    def mass_weights(self, conductivity=None):
        if conductivity is None:
            return self.weights
        w = np.asarray(conductivity(self.x[:, None]), dtype=float)
        return self.weights * w


class BoxGrid(Grid):
    """Tensor product of interval grids (2-d)."""

    def __init__(self, lo, hi, shape):
        if len(lo) != 2 or len(hi) != 2 or len(shape) != 2:
            raise InvalidParameterError("box grid is 2-d: lo, hi, shape of length 2")
        self.gx = IntervalGrid(lo[0], hi[0], shape[0])
        self.gy = IntervalGrid(lo[1], hi[1], shape[1])
        self.shape = (shape[0], shape[1])
        self.weights = np.outer(self.gx.weights, self.gy.weights).reshape(-1)
        self._cache = {}

    def nodes(self):
        X, Y = np.meshgrid(self.gx.x, self.gy.x, indexing="ij")
        return np.column_stack([X.reshape(-1), Y.reshape(-1)])

    def laplacian_matrix(self, conductivity=None):
        if conductivity is not None:
            raise InvalidParameterError("variable conductivity is 1-d only")
        Lx = self.gx.laplacian_matrix()
        Ly = self.gy.laplacian_matrix()
        Ix = sp.identity(self.gx.n, format="csr")
        Iy = sp.identity(self.gy.n, format="csr")
        return sp.kron(Lx, Iy, format="csr") + sp.kron(Ix, Ly, format="csr")


class RadialGrid(Grid):
    """Cell-centered grid in the radius for rotation-covariant data.

    Finite-volume form of u'' + (d-1)/rho u' with zero-flux faces at both
    ends.  r_in = 0 handles the origin of a ball (the rho^(d-1) face factor
    vanishes there); r_in > 0 gives the annulus used for ball complements.
    angular_mode m adds the centrifugal term -m^2/rho^2 so that separated
    data f(rho) * (angular harmonic of order m) evolve exactly; m >= 1
    modes vanish at the origin, which the centrifugal term enforces.
    """

    def __init__(self, r_in, r_out, n, ambient_dim, angular_mode=0):
        if r_out <= r_in or r_in < 0 or n < 3:
            raise InvalidParameterError("need 0 <= r_in < r_out, n >= 3")
        if angular_mode and ambient_dim != 2:
            raise InvalidParameterError("angular modes are implemented in 2-d")
        self.r_in, self.r_out = float(r_in), float(r_out)
        self.n = int(n)
        self.d = int(ambient_dim)
        self.m = int(angular_mode)
        self.h = (r_out - r_in) / n
        self.faces = r_in + self.h * np.arange(n + 1)
        self.rho = (self.faces[:-1] + self.faces[1:]) / 2
        self.weights = self.rho ** (self.d - 1) * self.h
        self._cache = {}

    def nodes(self):
        return self.rho[:, None]

    def laplacian_matrix(self, conductivity=None):
        if conductivity is not None:
            raise InvalidParameterError("conductivity not supported on radial grids")
        face_area = self.faces ** (self.d - 1)
        inner = face_area[1:-1] / self.h**2
        vol = self.rho ** (self.d - 1)
        lower = inner / vol[1:]
        upper = inner / vol[:-1]
        diag = np.zeros(self.n)
        diag[:-1] -= inner / vol[:-1]
        diag[1:] -= inner / vol[1:]
        if self.m:
            diag = diag - self.m**2 / self.rho**2
        return sp.diags([lower, diag, upper], [-1, 0, 1], format="csr")


class DiscGrid(Grid):
    """Polar tensor grid on the disc of given radius.

    Cell-centered in the radius (origin-free), uniform periodic angle.
    The full grid is needed for the spectral gap: the first nonzero
    Neumann mode is angular (m = 1), which no radial-only solver sees.
    """

    def __init__(self, radius, n_r, n_theta):
        if radius <= 0 or n_r < 3 or n_theta < 8:
            raise InvalidParameterError("need radius > 0, n_r >= 3, n_theta >= 8")
        self.radius = float(radius)
        self.n_r, self.n_theta = int(n_r), int(n_theta)
        self.h_r = radius / n_r
        self.h_t = 2 * np.pi / n_theta
        self.faces = self.h_r * np.arange(n_r + 1)
        self.rho = (self.faces[:-1] + self.faces[1:]) / 2
        self.theta = self.h_t * np.arange(n_theta)
        self.weights = np.repeat(self.rho * self.h_r * self.h_t, n_theta)
        self._cache = {}

    def nodes(self):
        R, T = np.meshgrid(self.rho, self.theta, indexing="ij")
        return np.column_stack([(R * np.cos(T)).reshape(-1), (R * np.sin(T)).reshape(-1)])

    def laplacian_matrix(self, conductivity=None):
        if conductivity is not None:
            raise InvalidParameterError("conductivity not supported on disc grids")
        nr, nt = self.n_r, self.n_theta
        face = self.faces / self.h_r**2
        inner = face[1:-1]
        lower = np.repeat(inner / self.rho[1:], nt)
        upper = np.repeat(inner / self.rho[:-1], nt)
        diag_r = np.zeros(nr)
        diag_r[:-1] -= inner / self.rho[:-1]
        diag_r[1:] -= inner / self.rho[1:]
        L_r = sp.diags(
            [lower, np.repeat(diag_r, nt), upper], [-nt, 0, nt], format="csr"
        )
        # periodic angular second difference scaled by 1/rho^2
        e = np.ones(nt)
        D = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], format="lil")
        D[0, -1] = 1.0
        D[-1, 0] = 1.0
        D = (D / self.h_t**2).tocsr()
        inv_r2 = sp.diags(1.0 / self.rho**2)
        L_t = sp.kron(inv_r2, D, format="csr")
        return L_r + L_t


# ---------------------------------------------------------------------------
# propagators


def _spectral_factors(grid, potential_key, potential, conductivity=None):
    cache = grid._cache
    key = ("eig", potential_key, conductivity is not None)
    if key not in cache:
        L = grid.laplacian_matrix(conductivity)
        w = grid.mass_weights(conductivity) if conductivity is not None else grid.weights
        sqw = np.sqrt(w)
        S = (sp.diags(sqw) @ L @ sp.diags(1.0 / sqw)).toarray()
        if potential is not None:
            S = S - np.diag(potential)
        S = (S + S.T) / 2
        lam, U = scipy.linalg.eigh(S)
        cache[key] = (lam, U, sqw)
    return cache[key]


def _apply_spectral(grid, f, t, potential=None, potential_key=None, conductivity=None):
    lam, U, sqw = _spectral_factors(grid, potential_key, potential, conductivity)
    g = sqw * f
    coef = U.T @ g
    out = U @ (np.exp(t * lam) * coef)
    return out / sqw


def _apply_stepped(grid, f, t, potential=None, rtol=1e-8, max_doublings=12):
    """Implicit Euler with Richardson extrapolation and step control."""
    L = grid.laplacian_matrix()
    if potential is not None:
        L = L - sp.diags(potential)
    size = grid.size

    def run(nsteps):
        dt = t / nsteps
        A = (sp.identity(size, format="csc") - dt * L).tocsc()
        lu = spla.splu(A)
        u = f.copy()
        for _ in range(nsteps):
            u = lu.solve(u)
        return u

    nsteps = 32
    u_coarse = run(nsteps)
    u_fine = run(2 * nsteps)
    rich = 2 * u_fine - u_coarse
    for _ in range(max_doublings):
        nsteps *= 2
        u_coarse = u_fine
        u_fine = run(2 * nsteps)
        rich_next = 2 * u_fine - u_coarse
        scale = max(np.max(np.abs(rich_next)), 1e-30)
        if np.max(np.abs(rich_next - rich)) <= rtol * scale:
            return rich_next
        rich = rich_next
    raise SolverError("implicit Euler step control failed to reach tolerance")


def neumann_heat(grid, f, t, method="auto"):
    """Heat semigroup e^{t Delta} f with Neumann boundary (semigroup clock).

    Conserves quadrature mass and satisfies the maximum principle.
    """
    vals = _values(f)
    if t < 0:
        raise InvalidParameterError("negative time")
    if t == 0:
        return _wrap_like(f, grid, vals.copy())
    if isinstance(grid, BoxGrid) and method in ("auto", "eig"):
        # separable: per-axis spectral propagators
        u = vals.reshape(grid.shape)
        ux = _spectral_factors(grid.gx, None, None)
        uy = _spectral_factors(grid.gy, None, None)
        lamx, Ux, sqwx = ux
        lamy, Uy, sqwy = uy
        g = (sqwx[:, None] * u) * sqwy[None, :]
        c = Ux.T @ g @ Uy
        c = np.exp(t * lamx)[:, None] * c * np.exp(t * lamy)[None, :]
        out = Ux @ c @ Uy.T
        out = (out / sqwx[:, None]) / sqwy[None, :]
        return _wrap_like(f, grid, out.reshape(-1))
    if method == "eig" or (method == "auto" and grid.size <= _DENSE_LIMIT):
        return _wrap_like(f, grid, _apply_spectral(grid, vals, t))
    return _wrap_like(f, grid, _apply_stepped(grid, vals, t))


def schrodinger_heat(grid, f, kappa, t, method="auto"):
    """Semigroup of Delta - kappa for a bounded potential kappa.

    kappa may be a scalar, a nodal array, or a field evaluated on the nodes.
    For constant kappa this equals e^{-kappa t} * neumann_heat exactly.
    """
    vals = _values(f)
    if np.isscalar(kappa) or (np.ndim(kappa) == 0):
        base = neumann_heat(grid, vals, t, method=method)
        return _wrap_like(f, grid, np.exp(-float(kappa) * t) * _values(base))
    if callable(kappa):
        pot = np.asarray(kappa(grid.nodes()), dtype=float)
        key = ("field", repr(kappa))
    else:
        pot = np.asarray(kappa, dtype=float).reshape(-1)
        key = ("array", pot.tobytes())
    if pot.size != grid.size:
        raise InvalidParameterError("potential size does not match grid")
    if isinstance(grid, BoxGrid):
        if np.ptp(pot) < 1e-14:
            base = neumann_heat(grid, vals, t)
            return _wrap_like(f, grid, np.exp(-pot[0] * t) * _values(base))
        return _wrap_like(f, grid, _apply_stepped(grid, vals, t, potential=pot))
    if method == "eig" or (method == "auto" and grid.size <= _DENSE_LIMIT):
        return _wrap_like(
            f, grid, _apply_spectral(grid, vals, t, potential=pot, potential_key=key)
        )
    return _wrap_like(f, grid, _apply_stepped(grid, vals, t, potential=pot))


def taming_reference(grid, f, phi, psi, t):
    """PDE reference for the path-weight semigroup with weight
    exp(-1/2 int phi ds + N^psi) on a 1-d Neumann domain.

    Realized by unitary conjugation: u = e^{-psi} Q_t(e^{psi} f) where Q is
    the Neumann semigroup of the e^{-2 psi}-weighted Laplacian plus the
    zeroth-order potential Gamma(psi) - phi.  This captures the boundary
    (Robin-type) effect of nonzero normal derivative of psi without any
    boundary-measure discretization.
    """
    if not isinstance(grid, IntervalGrid):
        raise InvalidParameterError("taming_reference is implemented on interval grids")
    vals = _values(f)
    x = grid.nodes()
    psi_x = np.asarray(psi(x), dtype=float)
    # conjugated generator: Delta_hat - (phi - Gamma(psi))
    pot = np.asarray(phi(x), dtype=float) - psi.gamma(x)

    def conduct(p):
        return np.exp(-2.0 * np.asarray(psi(p), dtype=float))

    key = ("taming", repr(psi), repr(phi))
    lam, U, sqw = _spectral_factors(grid, key, pot, conductivity=conduct)
    g = sqw * (np.exp(psi_x) * vals)
    out = (U @ (np.exp(t * lam) * (U.T @ g))) / sqw
    return _wrap_like(f, grid, np.exp(-psi_x) * out)


# ---------------------------------------------------------------------------
# discrete gradient / laplacian


def _diff_axis(u, h, axis):
    u = np.moveaxis(u, axis, 0)
    d = np.empty_like(u)
    d[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    d[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
    d[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    return np.moveaxis(d, 0, axis)


def gradient_norm(grid, u):
    """|grad u| nodewise: centered in the interior, one-sided at the boundary."""
    vals = _values(u)
    if isinstance(grid, IntervalGrid):
        out = np.abs(_diff_axis(vals, grid.h, 0))
    elif isinstance(grid, RadialGrid):
        out = np.abs(_diff_axis(vals, grid.h, 0))
    elif isinstance(grid, BoxGrid):
        v = vals.reshape(grid.shape)
        dx = _diff_axis(v, grid.gx.h, 0)
        dy = _diff_axis(v, grid.gy.h, 1)
        out = np.sqrt(dx**2 + dy**2).reshape(-1)
    elif isinstance(grid, DiscGrid):
        v = vals.reshape(grid.n_r, grid.n_theta)
        dr = _diff_axis(v, grid.h_r, 0)
        dt = (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2 * grid.h_t)
        out = np.sqrt(dr**2 + (dt / grid.rho[:, None]) ** 2).reshape(-1)
    else:
        raise InvalidParameterError(f"no gradient for grid {type(grid).__name__}")
    return _wrap_like(u, grid, out)


def laplacian_apply(grid, u):
    vals = _values(u)
    return _wrap_like(u, grid, grid.laplacian_matrix() @ vals)


# ---------------------------------------------------------------------------
# spectral gap


def spectral_gap(grid, rtol=1e-10, max_iter=800):
    """Smallest nonzero Neumann eigenvalue of -Delta on the grid.

    Shifted inverse power iteration on (A + I) with the constant mode
    deflated in the weighted inner product; deterministic start vector.
    """
    A = (-grid.laplacian_matrix()).tocsc()
    w = grid.weights
    ones = np.ones(grid.size)
    wnorm = w @ ones
    B = (A + sp.identity(grid.size, format="csc")).tocsc()
    lu = spla.splu(B)
    # deterministic start with nonzero overlap on every low mode family
    coords = grid.nodes()
    v = coords @ np.sqrt(1.0 + np.arange(coords.shape[1]))
    v = v + 1e-3 * np.sin(2.399 * np.arange(grid.size))
    v -= (w @ v) / wnorm
    v /= np.sqrt(w @ v**2)
    lam_old = np.inf
    for _ in range(max_iter):
        v = lu.solve(v)
        v -= (w @ v) / wnorm * ones
        nrm = np.sqrt(w @ v**2)
        if nrm == 0:
            raise SolverError("inverse iteration collapsed onto constants")
        v /= nrm
        lam = float(w @ (v * (A @ v)))
        if abs(lam - lam_old) <= rtol * max(abs(lam), 1e-30):
            return lam
        lam_old = lam
    raise SolverError("inverse power iteration stagnated")


# ---------------------------------------------------------------------------
# Bessel cross-check (independent of the eigensolver and of scipy.special)


def bessel_j0(x):
    """J0 by power series; adequate for |x| <= 8."""
    x = np.asarray(x, dtype=float)
    q = (x / 2) ** 2
    term = np.ones_like(x)
    total = term.copy()
    for m in range(1, 40):
        term = term * (-q) / (m * m)
        total += term
    return total


def bessel_j1(x):
    """J1 by power series; adequate for |x| <= 8."""
    x = np.asarray(x, dtype=float)
    q = (x / 2) ** 2
    term = x / 2
    total = term.copy()
    for m in range(1, 40):
        term = term * (-q) / (m * (m + 1))
        total += term
    return total


def bessel_j1prime_root(tol=1e-13):
    """First positive root of J1' (= J0 - J1/x), by bisection."""

    def g(x):
        return bessel_j0(x) - bessel_j1(x) / x

    lo, hi = 1.5, 2.2
    glo = g(lo)
    if not (glo > 0 > g(hi)):
        raise SolverError("bisection bracket for the J1' root is invalid")
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def disc_gap_reference(radius):
    """(j'_{1,1} / radius)^2: the Neumann spectral gap of the disc."""
    return (bessel_j1prime_root() / radius) ** 2
