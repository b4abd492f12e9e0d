"""Method-of-lines integrators on a truncated strip ``[0, L] x [0, T]``.

They manufacture approximate solutions for the factorization and
zero-curvature checks; nothing here aims at production PDE solving.

dNLS: second-order central differences in ``x`` with Dirichlet values from
user closures at both ends, adaptive explicit Runge-Kutta in ``t``.

N-wave: entry ``(i, j)``, ``i != j``, of the equation reads

    (d_i - d_j) rho_t - (dh_i - dh_j) rho_x = (zeta zetah - zetah zeta)_ij,

a transport equation with speed ``c_ij = (dh_i - dh_j)/(d_i - d_j)``.  When
both diagonals are strictly decreasing every ``c_ij > 0``, so information
moves towards decreasing ``x`` and the inflow boundary sits at ``x = L``.
The diagonal of ``rho`` does not evolve.  The upper triangle is advanced with
second-order upwind differences and classical RK4; the lower triangle is its
mirror.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import RectBivariateSpline

from .dirac import F_matrix
from .exceptions import BadConfig, Instability
from .matkernel import BlockSplit, opnorm

logger = logging.getLogger(__name__)

BLOWUP_FACTOR = 10.0
NWAVE_CFL = 0.5


@dataclass(frozen=True)
class StripGrid:
    L: float
    nx: int
    T: float
    nt: int

    def __post_init__(self):
        if not (self.L > 0 and self.T > 0):
            raise BadConfig("L and T must be positive")
        if int(self.nx) < 4 or int(self.nt) < 1:
            raise BadConfig("need nx >= 4 and nt >= 1")

    @property
    def dx(self):
        return self.L / self.nx

    @property
    def dt(self):
        return self.T / self.nt

    @property
    def x(self):
        return np.linspace(0.0, self.L, self.nx + 1)

    @property
    def t(self):
        return np.linspace(0.0, self.T, self.nt + 1)

    def courant(self, speed):
        return abs(speed) * self.dt / self.dx

    def check_cfl(self, speed, limit):
        c = self.courant(speed)
        if c > limit:
            raise BadConfig(f"Courant number {c:.3g} exceeds {limit:g}; increase nt")
        return c


@dataclass
class FieldHistory:
    """``values[n, i]`` is the matrix at ``(x_i, t_n)``."""

    grid: StripGrid
    values: np.ndarray

    def at(self, n, i):
        return self.values[n, i]

    def interpolator(self, kx=3, kt=3):
        """Spline field ``(x, t) -> matrix`` (and its x-derivative) over the grid."""
        g = self.grid
        vals = self.values
        shape = vals.shape[2:]
        splines = {}
        for idx in np.ndindex(*shape):
            comp = vals[(slice(None), slice(None)) + idx]
            splines[idx] = (RectBivariateSpline(g.x, g.t, comp.real.T, kx=kx, ky=kt),
                            RectBivariateSpline(g.x, g.t, comp.imag.T, kx=kx, ky=kt))

        def ev(x, t, dx=0):
            out = np.empty(shape, dtype=complex)
            for idx, (sr, si) in splines.items():
                out[idx] = sr(x, t, dx=dx, grid=False) + 1j * si(x, t, dx=dx, grid=False)
            return out

        return ev


def _laplacian(v, dx):
    out = np.zeros_like(v)
    out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / (dx * dx)
    return out


def integrate_dnls(init, left, right, grid, rtol=1e-10, atol=1e-12):
    """Semidiscretised ``2 v_t = i(v_xx - 2 v v* v)`` with Dirichlet ends.

    Parameters
    ----------
    init : callable
        ``x -> m1 x m2`` initial profile.
    left, right : callable
        ``t -> m1 x m2`` boundary values at ``x = 0`` and ``x = L``.
    grid : StripGrid
    """
    x = grid.x
    v0 = np.array([np.atleast_2d(np.asarray(init(xi), dtype=complex)) for xi in x])
    shape = v0.shape
    dx = grid.dx
    scale = max(np.abs(v0).max(), 1e-300)

    def rhs(t, y):
        v = y.reshape(shape).copy()
        v[0] = left(t)
        v[-1] = right(t)
        cubic = v @ np.conj(np.swapaxes(v, 1, 2)) @ v
        dv = 0.5j * (_laplacian(v, dx) - 2 * cubic)
        dv[0] = 0.0
        dv[-1] = 0.0
        return dv.ravel()

    sol = solve_ivp(rhs, (0.0, grid.T), v0.ravel(), method="RK45", t_eval=grid.t,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise Instability(f"time integration failed: {sol.message}")
    vals = sol.y.T.reshape((-1,) + shape)
    for n, t in enumerate(grid.t):
        vals[n, 0] = left(t)
        vals[n, -1] = right(t)
    if np.abs(vals).max() > BLOWUP_FACTOR * scale and scale > 1e-300:
        raise Instability("solution norm exceeded 10x its initial value")
    return FieldHistory(grid, vals)


def _upwind_dx(f, dx):
    """Second-order derivative biased to the right (inflow side)."""
    d = np.empty_like(f)
    d[:-2] = (-3 * f[:-2] + 4 * f[1:-1] - f[2:]) / (2 * dx)
    d[-2] = (f[-1] - f[-2]) / dx
    d[-1] = 0.0
    return d


def integrate_nwave(init, boundary, D, Dhat, grid):
    """Upwind method of lines for the N-wave equation.

    ``init(x)`` gives the Hermitian initial profile; ``boundary(t)`` the
    Hermitian values at the inflow end ``x = L``.  Only the upper off-diagonal
    entries evolve; the diagonal stays at its initial value.
    """
    D = np.asarray(D, dtype=float)
    Dh = np.asarray(Dhat, dtype=float)
    m = D.size
    dd = D[:, None] - D[None, :]
    ddh = Dh[:, None] - Dh[None, :]
    iu = np.triu_indices(m, 1)
    speed = ddh[iu] / dd[iu]
    if np.any(speed <= 0):
        raise BadConfig("all transport speeds must be positive (inflow at x = L)")
    grid.check_cfl(speed.max(), NWAVE_CFL)
    x = grid.x
    rho = np.array([np.asarray(init(xi), dtype=complex) for xi in x])
    diag = rho[:, np.arange(m), np.arange(m)].copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_dd = np.where(dd != 0, 1.0 / np.where(dd != 0, dd, 1.0), 0.0)

    def full(upper, t):
        r = np.zeros((x.size, m, m), dtype=complex)
        r[:, iu[0], iu[1]] = upper
        r = r + np.conj(np.swapaxes(r, 1, 2))
        r[:, np.arange(m), np.arange(m)] = diag
        return r

    def rhs(upper, t):
        r = full(upper, t)
        zeta = dd[None] * r
        zetah = ddh[None] * r
        q = zeta @ zetah - zetah @ zeta
        src = (q * inv_dd[None])[:, iu[0], iu[1]]
        out = speed[None, :] * _upwind_dx(upper, grid.dx) + src
        out[-1] = 0.0
        return out

    def pin(upper, t):
        b = np.asarray(boundary(t), dtype=complex)
        upper[-1] = b[iu]
        return upper

    u = pin(rho[:, iu[0], iu[1]].copy(), 0.0)
    scale = max(np.abs(u).max(), 1e-300)
    out = [full(u, 0.0)]
    dt = grid.dt
    for n in range(grid.nt):
        t = n * dt
        k1 = rhs(u, t)
        k2 = rhs(pin(u + 0.5 * dt * k1, t + 0.5 * dt), t + 0.5 * dt)
        k3 = rhs(pin(u + 0.5 * dt * k2, t + 0.5 * dt), t + 0.5 * dt)
        k4 = rhs(pin(u + dt * k3, t + dt), t + dt)
        u = pin(u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), t + dt)
        if np.abs(u).max() > BLOWUP_FACTOR * scale and scale > 1e-300:
            raise Instability(f"N-wave run blew up at t={t + dt:g}")
        out.append(full(u, t + dt))
    vals = np.array(out)
    herm = np.abs(vals - np.conj(np.swapaxes(vals, 2, 3))).max()
    if herm > 1e-10:
        raise Instability(f"Hermiticity lost ({herm:.2e})")
    return FieldHistory(grid, vals)


def commutator(a, b):
    return a @ b - b @ a


def zero_curvature_residual(G, F, grid):
    """``max |G_t - F_x + [G, F]|`` over interior points, central differences.

    ``G`` and ``F`` are arrays of shape ``(nt+1, nx+1, m, m)``.
    """
    G = np.asarray(G)
    F = np.asarray(F)
    Gt = (G[2:, 1:-1] - G[:-2, 1:-1]) / (2 * grid.dt)
    Fx = (F[1:-1, 2:] - F[1:-1, :-2]) / (2 * grid.dx)
    res = Gt - Fx + commutator(G[1:-1, 1:-1], F[1:-1, 1:-1])
    return float(np.linalg.norm(res, 2, axis=(-2, -1)).max()) if res.size else 0.0


def zero_curvature_pointwise(G, Gt, F, Fx):
    """Residual from closed-form values and derivatives at one point."""
    return opnorm(Gt - Fx + commutator(G, F))


def dnls_GF(history, z, split=None):
    """``G`` and ``F`` sampled on the grid of a dNLS history (``v_x`` by differences)."""
    vals = history.values
    grid = history.grid
    nt1, nx1, m1, m2 = vals.shape
    split = split or BlockSplit(m1, m2)
    vx = np.gradient(vals, grid.dx, axis=1, edge_order=2)
    sg = split.signs()
    G = np.empty((nt1, nx1, split.m, split.m), dtype=complex)
    F = np.empty_like(G)
    for n in range(nt1):
        for i in range(nx1):
            v = vals[n, i]
            V = np.zeros((split.m, split.m), dtype=complex)
            V[:m1, m1:] = v
            V[m1:, :m1] = v.conj().T
            G[n, i] = 1j * (np.diag(z * sg) + sg[:, None] * V)
            F[n, i] = F_matrix(split, v, vx[n, i], z)
    return G, F


def dnls_zero_curvature_closed(fld, x, t, z):
    """Pointwise residual for a field with closed-form ``v_t`` and ``v_xx``."""
    split = fld.split
    sg = split.signs()

    def lift(a):
        out = np.zeros((split.m, split.m), dtype=complex)
        out[: split.top, split.top:] = a
        out[split.top:, : split.top] = a.conj().T
        return out

    V, Vx, Vt, Vxx = (lift(f(x, t)) for f in (fld.v, fld.vx, fld.vt, fld.vxx))
    j = np.diag(sg).astype(complex)
    G = 1j * (z * j + j @ V)
    Gt = 1j * j @ Vt
    F = F_matrix(split, fld.v(x, t), fld.vx(x, t), z)
    Fx = -1j * (z * j @ Vx - (1j * Vxx - j @ (Vx @ V + V @ Vx)) / 2)
    return zero_curvature_pointwise(G, Gt, F, Fx)


def sampled_field(history):
    """Spline interpolant ``(x, t) -> v`` and ``(x, t) -> v_x`` of a history."""
    ev = history.interpolator()
    return (lambda x, t: ev(x, t)), (lambda x, t: ev(x, t, dx=1))


def l2_drift(history):
    """``max_t |int |v|^2 dx - int |v0|^2 dx|`` (trapezoid rule)."""
    g = history.grid
    dens = np.sum(np.abs(history.values) ** 2, axis=(2, 3))
    mass = np.trapezoid(dens, g.x, axis=1)
    return float(np.abs(mass - mass[0]).max())
