"""Weyl disks (matrix balls) of the Dirac system and the Weyl function.

For fixed ``x`` and ``Im z > 0`` the Mobius image

    phi(x, z, P) = [0 I] u^{-1} P ([I 0] u^{-1} P)^{-1},   P = [I; omega],

over all contractions ``omega`` is the set of ``phi`` with

    [I phi*] A [I; phi] >= 0,      A = u* j u.

Completing the square in ``phi`` with ``B = -A22 > 0`` gives the ball

    center  = B^{-1} A21
    r_left  = B^{-1/2}
    r_right = (A11 - A12 A22^{-1} A21)^{1/2},

since ``[I phi*] A [I; phi] = S - (phi - center)* B (phi - center)`` with
``S`` the Schur complement.  ``S^{-1}`` is the top-left block of
``A^{-1} = u^{-1} j u^{-*}``; that expression is used whenever ``u^{-1}`` is
known, because forming ``S`` directly cancels catastrophically once ``u``
is large.  The balls shrink as ``x`` grows and the centers converge to the
Weyl function.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._ode import DEFAULT_TOL, OVERFLOW_CAP
from .dirac import DIRAC_UPPER, classify, extend, propagate_path, propagate_u
from .exceptions import DimensionMismatch, NotNegativeDefinite, NumericalFailure
from .matkernel import (
    as_cmatrix,
    hermitian_part,
    herm_inv_sqrt,
    herm_sqrt,
    opnorm,
    right_divide,
    solve,
)

logger = logging.getLogger(__name__)

CONTRACTION_TOL = 1e-12


@dataclass(frozen=True)
class PairParam:
    """``P = [I_m1; omega]`` for a contraction ``omega`` (``m2 x m1``)."""

    omega: np.ndarray

    def __post_init__(self):
        om = as_cmatrix(self.omega, "omega")
        object.__setattr__(self, "omega", om)
        if opnorm(om) > 1 + CONTRACTION_TOL:
            raise ValueError(f"omega is not a contraction (norm {opnorm(om):.6g})")

    def matrix(self):
        m2, m1 = self.omega.shape
        return np.vstack([np.eye(m1, dtype=complex), self.omega])

    def check(self, split):
        """Verify ``P*P > 0`` and ``P* j P >= 0``; returns the two minimum eigenvalues."""
        p = self.matrix()
        if p.shape[0] != split.m or p.shape[1] != split.top:
            raise DimensionMismatch(f"omega shape {self.omega.shape} does not match {split}")
        lo_pp = np.linalg.eigvalsh(hermitian_part(p.conj().T @ p)).min()
        lo_pj = np.linalg.eigvalsh(hermitian_part(p.conj().T @ (split.signs()[:, None] * p))).min()
        if lo_pp <= 0 or lo_pj < -CONTRACTION_TOL:
            raise ValueError("parameter is not a nonsingular pair with property-j")
        return lo_pp, lo_pj


@dataclass
class WeylDisk:
    x: float
    z: complex
    center: np.ndarray
    r_left: np.ndarray
    r_right: np.ndarray

    @property
    def radius(self):
        return opnorm(self.r_left) * opnorm(self.r_right)

    def point(self, U):
        """The ball element ``center + r_left U r_right``."""
        return self.center + self.r_left @ U @ self.r_right


@dataclass
class WeylEstimate:
    z: complex
    value: np.ndarray
    error_bound: float
    x_max: float = 0.0
    disk: Optional[WeylDisk] = field(default=None, repr=False)
    weyl_integral: float = float("nan")
    nsteps: int = 0


def mobius_apply(u, p, split, u_inv=None):
    """Image of the pair ``p`` under the Mobius map of ``u``."""
    if not isinstance(p, PairParam):
        p = PairParam(p)
    P = p.matrix()
    y = u_inv @ P if u_inv is not None else solve(u, P, cond_max=np.inf)
    m1 = split.top
    return right_divide(y[m1:], y[:m1], what="[I 0] u^-1 P")


def j_form(u, split):
    """``A = u* j u`` (Hermitian part)."""
    return hermitian_part(u.conj().T @ (split.signs()[:, None] * u))


def membership_form(u, phi, split):
    """``[I phi*] u* j u [I; phi]``; positive semi-definite iff ``phi`` is in the ball."""
    phi = as_cmatrix(phi, "phi")
    col = np.vstack([np.eye(split.top, dtype=complex), phi])
    zz = u @ col
    return hermitian_part(zz.conj().T @ (split.signs()[:, None] * zz))


def disk_from_u(u, split, u_inv=None):
    """Center and semi-radii of the Weyl ball at the given fundamental solution."""
    u = as_cmatrix(u, "u")
    A = j_form(u, split)
    a11, a12, a21, a22 = split.blocks(A)
    top = np.linalg.eigvalsh(a22).max()
    if top >= -1e-12:
        raise NotNegativeDefinite(f"A22 has eigenvalue {top:.3e} >= -1e-12")
    B = -a22
    center = np.linalg.solve(B, a21)
    r_left = herm_inv_sqrt(B)
    if u_inv is None:
        schur = a11 - a12 @ np.linalg.solve(a22, a21)
        r_right = herm_sqrt(hermitian_part(schur), rtol=1e-9)
    else:
        ainv = u_inv @ (split.signs()[:, None] * u_inv.conj().T)
        r_right = herm_inv_sqrt(hermitian_part(ainv[: split.top, : split.top]), rtol=1e-9)
    return center, r_left, r_right


def weyl_disk(prop, split):
    """:class:`WeylDisk` for a :class:`~weylstrip.dirac.Propagation`."""
    c, rl, rr = disk_from_u(prop.u, split, prop.u_inv)
    return WeylDisk(prop.x, prop.z, c, rl, rr)


def _weyl_integral(pot, z, phi, x_max, tol, npts=65):
    xs = np.linspace(0.0, x_max, npts)
    props = propagate_path(pot, xs, z, tol)
    col = np.vstack([np.eye(pot.split.top, dtype=complex), phi])
    vals = [opnorm((p.u @ col).conj().T @ (p.u @ col)) for p in props]
    return float(np.trapezoid(vals, xs))


def estimate_weyl(pot, z, x_max=None, tol=DEFAULT_TOL, omega=None, x_start=1.0,
                  integral=False):
    """Estimate the Weyl function ``phi(z)`` of a Dirac potential.

    Parameters
    ----------
    pot : DiracPotential
    z : complex
        Spectral parameter with ``Im z > 0``.
    x_max : float, optional
        Truncation point.  When omitted, ``x`` is doubled from ``x_start``
        until the ball radius drops below ``tol`` or the overflow guard
        ``Im(z) x <= 60`` is reached.
    tol : float
        Integrator tolerance, and target radius when ``x_max`` is omitted.
    omega : array, optional
        Return the Mobius image of this contraction instead of the center.
    integral : bool
        Also evaluate the truncated square-integrability integral (costly).
    """
    z = complex(z)
    if classify(z) != DIRAC_UPPER:
        raise ValueError(f"Weyl estimates need Im z > 0, got {z}")
    split = pot.split
    cap = OVERFLOW_CAP / z.imag
    if x_max is not None:
        prop = propagate_u(pot, x_max, z, tol)
        disk = weyl_disk(prop, split)
    else:
        x = min(x_start, cap)
        prop = propagate_u(pot, x, z, tol)
        disk = weyl_disk(prop, split)
        while disk.radius > tol and x < cap:
            x = min(2 * x, cap)
            prop = extend(pot, prop, x, tol)
            disk = weyl_disk(prop, split)
    if omega is None:
        value = disk.center
    else:
        value = mobius_apply(prop.u, PairParam(omega), split, prop.u_inv)
    est = WeylEstimate(z, value, disk.radius, prop.x, disk, nsteps=prop.nsteps)
    if opnorm(value) > 1 + est.error_bound + 1e-8:
        raise NumericalFailure(f"estimate at z={z} is not contractive (norm {opnorm(value):.6g})")
    if integral:
        est.weyl_integral = _weyl_integral(pot, z, value, prop.x, tol)
        logger.debug("truncated Weyl integral at z=%s: %.6g (Im z * I = %.6g)",
                     z, est.weyl_integral, z.imag * est.weyl_integral)
    return est


def random_contraction(rng, shape, boundary=False):
    """Random matrix with spectral norm ``<= 1`` (``== 1`` if ``boundary``)."""
    g = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    g /= opnorm(g)
    if not boundary:
        g *= rng.uniform() ** (1.0 / (2 * max(shape)))
    return g
