"""Dense complex matrix helpers shared by every other module.

Matrices are plain ``numpy.ndarray`` objects with ``complex128`` dtype.  The
functions here add the checks the rest of the package relies on (Hermitian
symmetry, semi-definiteness, finiteness) on top of numpy/scipy.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import (
    DimensionMismatch,
    NegativeEigenvalue,
    NotHermitian,
    NumericalFailure,
    Overflow,
    SingularDenominator,
)

HERM_RTOL = 1e-12
COND_MAX = 1e12


def as_cmatrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D complex array (scalars become 1x1)."""
    arr = np.asarray(a, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericalFailure(f"{name} has non-finite entries")
    return arr


def check_finite(a, name="result"):
    if not np.all(np.isfinite(a)):
        raise NumericalFailure(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True)
class BlockSplit:
    """Partition of an ``m = top + bottom`` dimensional space."""

    top: int
    bottom: int

    def __post_init__(self):
        if int(self.top) < 1 or int(self.bottom) < 1:
            raise DimensionMismatch(
                f"block sizes must be >= 1, got ({self.top}, {self.bottom})")

    @property
    def m(self):
        return self.top + self.bottom

    def signs(self):
        """Diagonal of ``j`` as a real vector."""
        out = np.ones(self.m)
        out[self.top:] = -1.0
        return out

    def j(self):
        """The signature matrix ``diag(I_top, -I_bottom)``."""
        return np.diag(self.signs()).astype(complex)

    def blocks(self, a):
        """Split a square ``m x m`` matrix into ``(a11, a12, a21, a22)``."""
        a = np.asarray(a)
        if a.shape != (self.m, self.m):
            raise DimensionMismatch(f"expected {self.m}x{self.m}, got {a.shape}")
        p = self.top
        return a[:p, :p], a[:p, p:], a[p:, :p], a[p:, p:]


def signature(k, m):
    """``J_k = diag(I_k, -I_{m-k})``."""
    return BlockSplit(k, m - k).j()


def hermitian_part(a):
    return 0.5 * (a + a.conj().T)


def check_hermitian(a, rtol=HERM_RTOL, name="matrix"):
    a = as_cmatrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {a.shape}")
    scale = max(np.linalg.norm(a), 1.0)
    if np.linalg.norm(a - a.conj().T) > rtol * scale:
        raise NotHermitian(f"{name} is not Hermitian within {rtol:g}")
    return hermitian_part(a)


def _psd_eigh(a, rtol):
    a = check_hermitian(a, rtol)
    w, q = np.linalg.eigh(a)
    floor = -rtol * max(np.linalg.norm(a), np.finfo(float).tiny)
    if w.size and w.min() < floor:
        raise NegativeEigenvalue(f"eigenvalue {w.min():.3e} below {floor:.3e}")
    return np.clip(w, 0.0, None), q


def herm_sqrt(a, rtol=HERM_RTOL):
    """Positive semi-definite square root of a Hermitian PSD matrix.

    Eigenvalues in ``[-rtol*|a|, 0)`` are clamped to zero.
    """
    w, q = _psd_eigh(a, rtol)
    s = (q * np.sqrt(w)) @ q.conj().T
    return hermitian_part(s)


def herm_inv_sqrt(a, rtol=HERM_RTOL):
    """``a^{-1/2}`` for Hermitian positive definite ``a``."""
    w, q = _psd_eigh(a, rtol)
    if w.min() <= 0.0:
        raise NegativeEigenvalue("matrix is singular, no inverse square root")
    return hermitian_part((q / np.sqrt(w)) @ q.conj().T)


def expm(a):
    """Matrix exponential (scipy's scaling-and-squaring Pade code)."""
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expm needs a square matrix, got {a.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        e = scipy.linalg.expm(a)
    if not np.all(np.isfinite(e)):
        raise Overflow("matrix exponential overflowed double range")
    return e


def solve(a, b, cond_max=COND_MAX, what="denominator"):
    """Solve ``a x = b`` after a condition-number check."""
    c = np.linalg.cond(a)
    if not np.isfinite(c) or c > cond_max:
        raise SingularDenominator(f"{what} has condition number {c:.3e}")
    return np.linalg.solve(a, b)


def right_divide(num, den, cond_max=COND_MAX, what="denominator"):
    """``num @ inv(den)`` computed with a linear solve."""
    return solve(den.T, num.T, cond_max, what).T


def opnorm(a):
    """Spectral norm (largest singular value)."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))
