"""Adaptive fourth-order Magnus integrator for ``Y' = A(s) Y``.

Each step multiplies by ``exp(Omega)`` with the two-point Gauss Magnus
generator

    Omega = h/2 (A1 + A2) + sqrt(3) h^2 / 12 [A2, A1],

so whenever ``A(s)`` stays in a matrix Lie algebra (e.g. ``A* j + j A = 0``)
the computed propagator stays in the group up to rounding.  The step size is
controlled by step doubling: a step of size ``h`` is compared with two steps
of size ``h/2`` and accepted when the difference, scaled by 1/15, is at most
``tol``.  The two half steps are kept.

The optional diagonal ``frame`` ``L`` switches to the scaled unknown
``Y(s) exp(-s L)``; each step then reads ``Y <- E Y exp(-h L)``.  This keeps
stored magnitudes moderate when the exponential growth of ``Y`` is known in
closed form.
"""
import math

import numpy as np
import scipy.linalg

from .exceptions import StepFailure

DEFAULT_TOL = 1e-10
OVERFLOW_CAP = 60.0

_C1 = 0.5 - math.sqrt(3) / 6
_C2 = 0.5 + math.sqrt(3) / 6
_K = math.sqrt(3) / 12
_MAX_STEPS = 200_000


def _omega(gen, s, h):
    a1 = gen(s + _C1 * h)
    a2 = gen(s + _C2 * h)
    return 0.5 * h * (a1 + a2) + _K * h * h * (a2 @ a1 - a1 @ a2)


def _step(gen, s, h):
    full = scipy.linalg.expm(_omega(gen, s, h))
    o1 = _omega(gen, s, 0.5 * h)
    o2 = _omega(gen, s + 0.5 * h, 0.5 * h)
    e1 = scipy.linalg.expm(o1)
    e2 = scipy.linalg.expm(o2)
    half = e2 @ e1
    err = np.linalg.norm(full - half, np.inf) / 15.0
    return half, err


def integrate_magnus(gen, points, tol=DEFAULT_TOL, frame=None, h0=None, y0=None, y0inv=None):
    """Propagate ``Y' = gen(s) Y`` through the increasing ``points``.

    ``Y(points[0])`` is the identity unless ``y0``/``y0inv`` (value and its
    inverse) are given.  Returns ``(values, inverses, logdets, nsteps)``; with a
    ``frame`` (1-D array of the diagonal of ``L``) the values are the scaled
    ``Y exp(-s L)`` and their inverses.  ``logdets[i]`` is the complex log of
    ``det Y(points[i]) / det Y(points[0])`` (unscaled), accumulated from the
    per-step determinants, which stay well conditioned even when ``Y`` is not.
    """
    points = [float(p) for p in points]
    s = points[0]
    m = gen(s).shape[0]
    y = np.eye(m, dtype=complex) if y0 is None else np.array(y0, dtype=complex)
    yinv = np.linalg.inv(y) if y0inv is None else np.array(y0inv, dtype=complex)
    values = [y.copy()]
    inverses = [yinv.copy()]
    logdet = 0j
    logdets = [logdet]
    span = points[-1] - points[0]
    h = h0 if h0 is not None else (min(0.1, span / 4) if span > 0 else 0.1)
    nsteps = 0
    for target in points[1:]:
        if target < s:
            raise ValueError("points must be increasing")
        while s < target:
            if nsteps > _MAX_STEPS:
                raise StepFailure("step budget exhausted")
            hh = min(h, target - s)
            truncated = hh < h
            while True:
                half, err = _step(gen, s, hh)
                if not np.isfinite(err):
                    raise StepFailure(f"non-finite step at s={s:g}")
                if err <= tol:
                    break
                hh *= max(0.2, 0.9 * (tol / err) ** 0.2)
                truncated = False
                if hh < 1e-12 * max(1.0, abs(s)):
                    raise StepFailure(f"step size underflow at s={s:g}")
            inv = np.linalg.inv(half)
            sign, logabs = np.linalg.slogdet(half)
            logdet += logabs + 1j * np.angle(sign)
            if frame is None:
                y = half @ y
                yinv = yinv @ inv
            else:
                sc = np.exp(-hh * frame)
                y = (half @ y) * sc[None, :]
                yinv = (1.0 / sc)[:, None] * (yinv @ inv)
            s = target if hh >= target - s else s + hh
            nsteps += 1
            grow = 4.0 if err == 0 else min(4.0, 0.9 * (tol / err) ** 0.2)
            proposal = hh * max(grow, 0.2)
            h = max(h, proposal) if truncated else proposal
            if not (np.all(np.isfinite(y)) and np.all(np.isfinite(yinv))):
                raise StepFailure(f"non-finite state at s={s:g}")
        values.append(y.copy())
        inverses.append(yinv.copy())
        logdets.append(logdet)
    return values, inverses, logdets, nsteps
