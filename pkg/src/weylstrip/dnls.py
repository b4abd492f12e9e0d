"""Time evolution of the Weyl function for the defocusing NLS equation

    2 v_t = i (v_xx - 2 v v* v).

The boundary traces ``v(0, t)`` and ``v_x(0, t)`` determine ``R(t, z)`` through
``R_t = F(0, t, z) R``, ``R(0) = I``, and the Weyl function of the x-slice at
time ``t`` is the linear-fractional image

    phi(t, z) = (R21 + R22 phi0)(R11 + R12 phi0)^{-1}.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._ode import DEFAULT_TOL, OVERFLOW_CAP, integrate_magnus
from .dirac import DiracPotential, F_matrix
from .disks import estimate_weyl
from .exceptions import EvalOutOfRange, OverflowGuard
from .matkernel import BlockSplit, as_cmatrix, opnorm, right_divide

logger = logging.getLogger(__name__)


class DiracField:
    """A matrix field ``v(x, t)`` on the semi-strip with its derivatives.

    ``v`` and ``vx`` are required; ``vt``, ``vxx`` (for the PDE residual) and
    ``vxt``, ``vtx`` are optional.  Each is a callable ``(x, t) -> m1 x m2``.
    """

    def __init__(self, split, v, vx, vt=None, vxx=None, bound=None, a=np.inf):
        if not isinstance(split, BlockSplit):
            split = BlockSplit(*split)
        self.split = split
        self._v, self._vx, self._vt, self._vxx = v, vx, vt, vxx
        self.bound = bound
        self.a = float(a)

    def _shape(self, val):
        return np.asarray(val, dtype=complex).reshape(self.split.top, self.split.bottom)

    def v(self, x, t):
        return self._shape(self._v(x, t))

    def vx(self, x, t):
        return self._shape(self._vx(x, t))

    @property
    def has_vt(self):
        return self._vt is not None

    @property
    def has_vxx(self):
        return self._vxx is not None

    def vt(self, x, t):
        return self._shape(self._vt(x, t))

    def vxx(self, x, t):
        return self._shape(self._vxx(x, t))

    def slice_at(self, t):
        """The Dirac potential ``x -> v(x, t)``."""
        return DiracPotential(self.split, lambda x: self.v(x, t), lambda x: self.vx(x, t),
                              bound=self.bound)

    def trace_at(self, x=0.0):
        """Boundary data ``t -> (v(x, t), v_x(x, t))`` along a vertical line."""
        return BoundaryData(self.a, lambda t: self.v(x, t), lambda t: self.vx(x, t))


class CWSolution(DiracField):
    """Plane wave ``v = A Q exp(i(k x - omega t))`` with ``omega = (k^2 + 2A^2)/2``.

    ``Q`` is a fixed unitary (``1x1`` identity by default), so ``v v* v = A^2 v``
    and the scalar dispersion relation carries over unchanged.
    """

    def __init__(self, A, k, Q=None):
        self.A = float(A)
        self.k = float(k)
        self.Q = np.eye(1, dtype=complex) if Q is None else as_cmatrix(Q, "Q")
        if not np.allclose(self.Q.conj().T @ self.Q, np.eye(self.Q.shape[1]), atol=1e-12):
            raise ValueError("Q must be unitary")
        self.omega = (self.k ** 2 + 2 * self.A ** 2) / 2
        A, k, w, Qm = self.A, self.k, self.omega, self.Q

        def ph(x, t):
            return np.exp(1j * (k * x - w * t))

        super().__init__(
            BlockSplit(*Qm.shape),
            v=lambda x, t: A * Qm * ph(x, t),
            vx=lambda x, t: 1j * k * A * Qm * ph(x, t),
            vt=lambda x, t: -1j * w * A * Qm * ph(x, t),
            vxx=lambda x, t: -k * k * A * Qm * ph(x, t),
            bound=A,
        )

    def vxt(self, x, t):
        return self.k * self.omega * self.v(x, t)


@dataclass
class BoundaryData:
    a: float
    v0: Callable
    vx0: Callable

    def check(self, t):
        if not (0.0 <= t < self.a or (t == 0.0 and self.a == 0.0)):
            raise EvalOutOfRange(f"t={t:g} outside [0, {self.a:g})")


@dataclass
class EvolutionOperator:
    t: float
    z: complex
    R: np.ndarray
    R_inv: Optional[np.ndarray] = field(default=None, repr=False)
    split: Optional[BlockSplit] = None
    logdet: complex = 0j
    nsteps: int = 0

    def blocks(self, split=None):
        split = split or self.split
        return split.blocks(self.R)


def dnls_residual(fld, points, h=1e-4):
    """``max |2 v_t - i(v_xx - 2 v v* v)|`` over ``points``.

    Closed-form ``vt``/``vxx`` are used when the field has them, central
    differences with step ``h`` otherwise.
    """
    worst = 0.0
    for x, t in points:
        v = fld.v(x, t)
        vt = fld.vt(x, t) if fld.has_vt else (fld.v(x, t + h) - fld.v(x, t - h)) / (2 * h)
        if fld.has_vxx:
            vxx = fld.vxx(x, t)
        else:
            vxx = (fld.v(x + h, t) - 2 * v + fld.v(x - h, t)) / (h * h)
        r = 2 * vt - 1j * (vxx - 2 * v @ v.conj().T @ v)
        worst = max(worst, opnorm(r))
    return worst


def propagate_R(bd, split, t, z, tol=DEFAULT_TOL, points=None):
    """``R_t = F(0, t, z) R``, ``R(0) = I`` from the boundary traces.

    With ``points`` (increasing times starting at 0) returns a list of
    operators, otherwise the single operator at ``t``.
    """
    z = complex(z)
    ts = [0.0, float(t)] if points is None else [float(p) for p in points]
    if ts[0] != 0.0:
        ts = [0.0] + ts
    for s in ts:
        bd.check(s)
    if abs((z * z).imag) * ts[-1] > OVERFLOW_CAP:
        raise OverflowGuard(f"|Im z^2| t = {abs((z * z).imag) * ts[-1]:g} exceeds {OVERFLOW_CAP:g}")

    def gen(s):
        return F_matrix(split, bd.v0(s), bd.vx0(s), z)

    values, inverses, logdets, nsteps = integrate_magnus(gen, ts, tol)
    ops = [EvolutionOperator(s, z, r, ri, split, ld, nsteps)
           for s, r, ri, ld in zip(ts, values, inverses, logdets)]
    return ops[-1] if points is None else ops[1:] if points[0] != 0.0 else ops


def evolve_weyl(phi0, R, split=None):
    """Linear-fractional image ``(R21 + R22 phi0)(R11 + R12 phi0)^{-1}``."""
    if isinstance(R, EvolutionOperator):
        split = split or R.split
        R = R.R
    phi0 = as_cmatrix(phi0, "phi0")
    if split is None:
        split = BlockSplit(phi0.shape[1], phi0.shape[0])
    r11, r12, r21, r22 = split.blocks(R)
    return right_divide(r21 + r22 @ phi0, r11 + r12 @ phi0, what="R11 + R12 phi0")


def _two_sided(gen_x, gen_t, z, x, t, tol):
    """Both sides of ``u(x,t) R(t) = R(x,t) u(x,0)``."""
    u_t = integrate_magnus(lambda s: gen_x(s, t), [0.0, x], tol)[0][-1]
    u_0 = integrate_magnus(lambda s: gen_x(s, 0.0), [0.0, x], tol)[0][-1]
    R_0 = integrate_magnus(lambda s: gen_t(0.0, s), [0.0, t], tol)[0][-1]
    R_x = integrate_magnus(lambda s: gen_t(x, s), [0.0, t], tol)[0][-1]
    return u_t @ R_0, R_x @ u_0


def factorization_residual(fld, z, x, t, tol=DEFAULT_TOL, relative=False):
    """``|u(x,t,z) R(t,z) - R(x,t,z) u(x,0,z)|`` for a dNLS field.

    Vanishes (up to integration error) exactly when the field satisfies the
    zero-curvature equation, i.e. solves dNLS.
    """
    z = complex(z)
    split = fld.split
    sg = split.signs()

    def gen_x(s, tt):
        v = fld.v(s, tt)
        V = np.zeros((split.m, split.m), dtype=complex)
        V[: split.top, split.top:] = v
        V[split.top:, : split.top] = v.conj().T
        return 1j * (np.diag(z * sg) + sg[:, None] * V)

    def gen_t(xx, s):
        return F_matrix(split, fld.v(xx, s), fld.vx(xx, s), z)

    lhs, rhs = _two_sided(gen_x, gen_t, z, float(x), float(t), tol)
    res = opnorm(lhs - rhs)
    return res / opnorm(lhs) if relative else res


@dataclass
class ConsistencyPoint:
    z: complex
    phi_direct: np.ndarray
    phi_evolved: np.ndarray
    deviation: float
    bound_direct: float
    bound_initial: float


@dataclass
class ConsistencyReport:
    t: float
    tol: float
    points: list

    @property
    def max_deviation(self):
        return max(p.deviation for p in self.points)


def _consistency_point(fld, z, t, tol, x_max):
    direct = estimate_weyl(fld.slice_at(t), z, x_max=x_max, tol=tol)
    initial = estimate_weyl(fld.slice_at(0.0), z, x_max=x_max, tol=tol)
    R = propagate_R(fld.trace_at(0.0), fld.split, t, z, tol)
    evolved = evolve_weyl(initial.value, R)
    dev = opnorm(direct.value - evolved)
    logger.debug("z=%s deviation %.3e", z, dev)
    return ConsistencyPoint(complex(z), direct.value, evolved, dev,
                            direct.error_bound, initial.error_bound)


def evolution_consistency(fld, z_grid, t, tol=DEFAULT_TOL, x_max=None, threads=1):
    """Compare the Weyl function of the slice at ``t`` with the evolved one.

    ``phi_direct`` comes from the x-slice ``v(., t)``; ``phi_evolved`` from the
    slice at ``t = 0`` pushed through ``R(t, z)`` built from the boundary traces
    only.  Points are reported sorted by ``(Re z, Im z)``.
    """
    zs = sorted((complex(z) for z in z_grid), key=lambda z: (z.real, z.imag))
    for z in zs:
        if z.imag <= 0:
            raise ValueError(f"z={z} must lie in the upper half-plane")

    def work(z):
        return _consistency_point(fld, z, t, tol, x_max)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            pts = list(pool.map(work, zs))
    else:
        pts = [work(z) for z in zs]
    return ConsistencyReport(float(t), tol, pts)


def refinement_study(fld, z_grid, t, tols=(1e-6, 1e-8, 1e-10), threads=1):
    """Max deviation of :func:`evolution_consistency` at successively finer ``tol``.

    Each level tightens both the integrator tolerance and the ball radius
    required before the estimator stops doubling ``x``.
    """
    return [evolution_consistency(fld, z_grid, t, tol=tl, threads=threads).max_deviation
            for tl in tols]
