"""Dirac (AKNS / Zakharov-Shabat) system ``y_x = i(z j + j V(x)) y``.

``V = [[0, v], [v*, 0]]`` with ``v`` an ``m1 x m2`` matrix function and
``j = diag(I_m1, -I_m2)``.  :func:`propagate_u` integrates the fundamental
solution normalised by ``u(0, z) = I``; the inverse ``u^{-1}`` is integrated
alongside because the disk computations need both and inverting ``u`` after
the fact loses accuracy once ``u`` is large.
"""
from dataclasses import dataclass, field
import numpy as np
from scipy.interpolate import CubicSpline

from ._ode import DEFAULT_TOL, OVERFLOW_CAP, integrate_magnus
from .exceptions import (
    BoundViolation,
    DimensionMismatch,
    EvalOutOfRange,
    MissingDerivative,
    OverflowGuard,
    StepFailure,
)
from .matkernel import BlockSplit, as_cmatrix, opnorm

LIOUVILLE_ATOL = 1e-6

DIRAC_UPPER = "dirac-upper"
DIRAC_REAL = "dirac-real"
NWAVE_LOWER = "nwave-lower"


class DiracPotential:
    """Evaluator for the ``m1 x m2`` potential ``v(x)`` on ``[x_min, x_max]``.

    Parameters
    ----------
    split : BlockSplit
        ``(m1, m2)``.
    v : callable
        ``x -> m1 x m2`` array (scalars are accepted when ``m1 = m2 = 1``).
    vx : callable, optional
        ``x -> dv/dx``; needed only for :func:`build_F`.
    bound : float, optional
        Sup of ``|v(x)|`` (spectral norm) over the domain.  Every evaluation
        is checked against it.
    domain : tuple of float
        Closed interval on which ``v`` may be evaluated.
    """

    def __init__(self, split, v, vx=None, bound=None, domain=(0.0, np.inf)):
        if not isinstance(split, BlockSplit):
            split = BlockSplit(*split)
        self.split = split
        self._v = v
        self._vx = vx
        self.bound = None if bound is None else float(bound)
        self.domain = (float(domain[0]), float(domain[1]))

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls, m1=1, m2=1):
        z = np.zeros((m1, m2), dtype=complex)
        return cls(BlockSplit(m1, m2), lambda x: z, lambda x: z, bound=0.0)

    @classmethod
    def constant(cls, value):
        c = as_cmatrix(value, "constant potential")
        zero = np.zeros_like(c)
        return cls(BlockSplit(*c.shape), lambda x: c, lambda x: zero, bound=opnorm(c))

    @classmethod
    def sampled(cls, x, values):
        """Cubic-spline interpolation of samples ``values[i] = v(x[i])``."""
        x = np.asarray(x, dtype=float)
        vals = np.asarray(values, dtype=complex)
        if vals.ndim == 1:
            vals = vals[:, None, None]
        if vals.ndim != 3 or vals.shape[0] != x.size:
            raise DimensionMismatch("values must have shape (n, m1, m2)")
        spline = CubicSpline(x, vals, axis=0)
        dspline = spline.derivative()
        fine = np.linspace(x[0], x[-1], 4 * x.size)
        bound = max(opnorm(s) for s in spline(fine))
        bound = max(bound, max(opnorm(s) for s in vals))
        return cls(BlockSplit(vals.shape[1], vals.shape[2]), spline, dspline,
                   bound=bound * (1 + 1e-9), domain=(x[0], x[-1]))

    # evaluation ---------------------------------------------------------
    @property
    def has_derivative(self):
        return self._vx is not None

    def _check_x(self, x):
        lo, hi = self.domain
        if not (lo - 1e-12 <= x <= hi + 1e-12):
            raise EvalOutOfRange(f"x={x:g} outside [{lo:g}, {hi:g}]")

    def _shape(self, val):
        val = np.asarray(val, dtype=complex).reshape(self.split.top, self.split.bottom)
        return val

    def v(self, x):
        self._check_x(x)
        val = self._shape(self._v(x))
        limit = None if self.bound is None else self.bound * (1 + 1e-9) + 1e-14
        if limit is not None and np.linalg.norm(val) > limit and opnorm(val) > limit:
            raise BoundViolation(f"|v({x:g})| = {opnorm(val):.6g} exceeds bound {self.bound:g}")
        return val

    def vx(self, x):
        if self._vx is None:
            raise MissingDerivative("potential has no x-derivative evaluator")
        self._check_x(x)
        return self._shape(self._vx(x))

    def V(self, x):
        return _hermitian_lift(self.v(x))

    def Vx(self, x):
        return _hermitian_lift(self.vx(x))


def _hermitian_lift(v):
    m1, m2 = v.shape
    out = np.zeros((m1 + m2, m1 + m2), dtype=complex)
    out[:m1, m1:] = v
    out[m1:, :m1] = v.conj().T
    return out


@dataclass(frozen=True)
class SpectralPoint:
    z: complex
    regime: str

    def __post_init__(self):
        expected = classify(self.z)
        if self.regime == NWAVE_LOWER:
            if self.z.imag >= 0:
                raise ValueError(f"{self.z} is not in the lower half-plane")
        elif self.regime != expected:
            raise ValueError(f"regime {self.regime!r} inconsistent with z={self.z}")


def classify(z, M=None):
    """Regime tag for a spectral parameter.

    With ``M`` given, points with ``Im z < -M`` are tagged ``nwave-lower``.
    """
    z = complex(z)
    if M is not None and z.imag < -M:
        return NWAVE_LOWER
    if z.imag > 0:
        return DIRAC_UPPER
    if z.imag == 0:
        return DIRAC_REAL
    raise ValueError(f"z={z} lies in no admissible regime")


@dataclass
class Propagation:
    x: float
    z: complex
    u: np.ndarray
    u_inv: np.ndarray = field(repr=False)
    error_estimate: float = 0.0
    nsteps: int = 0
    logdet: complex = 0j


def build_G(pot, x, z):
    """``G = i(z j + j V(x))``."""
    sg = pot.split.signs()
    return 1j * (np.diag(z * sg) + sg[:, None] * pot.V(x))


def build_F(pot, x, z):
    """``F = -i(z^2 j + z jV - (i V_x - j V^2)/2)``; needs ``v_x``."""
    if not pot.has_derivative:
        raise MissingDerivative("build_F needs the x-derivative of v")
    return F_matrix(pot.split, pot.v(x), pot.vx(x), z)


def F_matrix(split, v, vx, z):
    """``F`` from the values of ``v`` and ``v_x`` at a single point."""
    sg = split.signs()
    V = _hermitian_lift(np.asarray(v, dtype=complex).reshape(split.top, split.bottom))
    Vx = _hermitian_lift(np.asarray(vx, dtype=complex).reshape(split.top, split.bottom))
    jV = sg[:, None] * V
    return -1j * (np.diag(z * z * sg) + z * jV - (1j * Vx - jV @ V) / 2)


def _check_guard(z, x):
    if abs(complex(z).imag) * x > OVERFLOW_CAP:
        raise OverflowGuard(f"|Im z| * x = {abs(complex(z).imag) * x:g} exceeds {OVERFLOW_CAP:g}")


def liouville_defect(prop, split, direct=False):
    """``log|det u| + Im(z)(m1 - m2) x``; zero in exact arithmetic.

    By default ``det u`` is the product of the per-step determinants; with
    ``direct`` it is computed from ``u`` itself, which is only meaningful
    while ``u`` is well conditioned.
    """
    if direct:
        _, logabs = np.linalg.slogdet(prop.u)
    else:
        logabs = prop.logdet.real
    return logabs + complex(prop.z).imag * (split.top - split.bottom) * prop.x


def propagate_path(pot, xs, z, tol=DEFAULT_TOL):
    """Fundamental solution at each of the increasing points ``xs``.

    ``xs[0]`` may be ``0`` (giving the identity); it is prepended otherwise.
    """
    z = complex(z)
    xs = [float(x) for x in xs]
    if any(x < 0 for x in xs) or any(b < a for a, b in zip(xs[:-1], xs[1:])):
        raise ValueError("x values must be non-negative and increasing")
    _check_guard(z, xs[-1])
    pts = xs if xs[0] == 0.0 else [0.0] + xs
    values, inverses, logdets, nsteps = integrate_magnus(
        lambda x: build_G(pot, x, z), pts, tol)
    if xs[0] != 0.0:
        values, inverses, logdets = values[1:], inverses[1:], logdets[1:]
    out = []
    for x, u, uinv, ld in zip(xs, values, inverses, logdets):
        scale = max(1.0, opnorm(u))
        prop = Propagation(x, z, u, uinv, error_estimate=nsteps * tol * scale,
                           nsteps=nsteps, logdet=ld)
        defect = liouville_defect(prop, pot.split)
        if abs(defect) > LIOUVILLE_ATOL:
            raise StepFailure(f"Liouville determinant defect {defect:.3e} at x={x:g}")
        out.append(prop)
    return out


def extend(pot, prop, x, tol=DEFAULT_TOL):
    """Continue an existing :class:`Propagation` from ``prop.x`` to ``x``."""
    if x < prop.x:
        raise ValueError("can only extend forward")
    _check_guard(prop.z, x)
    z = prop.z
    (_, u), (_, uinv), (_, ld), nsteps = integrate_magnus(
        lambda s: build_G(pot, s, z), [prop.x, float(x)], tol, y0=prop.u, y0inv=prop.u_inv)
    total = prop.nsteps + nsteps
    out = Propagation(float(x), z, u, uinv, error_estimate=total * tol * max(1.0, opnorm(u)),
                      nsteps=total, logdet=prop.logdet + ld)
    defect = liouville_defect(out, pot.split)
    if abs(defect) > LIOUVILLE_ATOL:
        raise StepFailure(f"Liouville determinant defect {defect:.3e} at x={x:g}")
    return out


def propagate_u(pot, x, z, tol=DEFAULT_TOL):
    """Solve ``u_x = G u``, ``u(0) = I`` up to ``x`` with local tolerance ``tol``."""
    if x < 0:
        raise ValueError("x must be non-negative")
    return propagate_path(pot, [0.0, float(x)], z, tol)[-1]
