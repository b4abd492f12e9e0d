"""Closed-form reference values used to validate the numerical routes.

Nothing here integrates an ODE.  Constant-coefficient systems are handled by
eigen/Schur decompositions, plane waves are reduced to constant coefficients
by a diagonal gauge transformation.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .matkernel import BlockSplit, as_cmatrix, right_divide


def constant_dirac_generator(v0, z):
    v0 = as_cmatrix(v0)
    split = BlockSplit(*v0.shape)
    sg = split.signs()
    V = np.zeros((split.m, split.m), dtype=complex)
    V[: split.top, split.top:] = v0
    V[split.top:, : split.top] = v0.conj().T
    return 1j * (np.diag(z * sg) + sg[:, None] * V)


def _stable_subspace(G, k, side):
    # ordered Schur form: first k columns span the requested eigenspace
    if side == "lhp":
        T, Z, sdim = scipy.linalg.schur(G, output="complex", sort="lhp")
    else:
        T, Z, sdim = scipy.linalg.schur(G, output="complex", sort=lambda w: w.real > 0)
    if sdim != k:
        raise ValueError(f"expected {k} eigenvalues in {side}, found {sdim}")
    return Z[:, :k]


def constant_weyl(v0, z):
    """Weyl function of ``y' = i(z j + j V0) y`` for constant ``v0``.

    ``[I; phi]`` spans the invariant subspace of the decaying solutions.
    """
    v0 = as_cmatrix(v0)
    m1 = v0.shape[0]
    G = constant_dirac_generator(v0, z)
    Y = _stable_subspace(G, m1, "lhp")
    return right_divide(Y[m1:], Y[:m1])


def cw_slice_weyl(amp, k, z, phase=0.0, Q=None):
    """Weyl function for the slice ``v(x) = amp * Q * exp(i(kx + phase))``.

    The gauge ``y = exp(i k x j / 2) y~`` turns it into the constant potential
    ``amp * Q * exp(i phase)`` at the shifted parameter ``z - k/2``; the
    contraction sets of both systems coincide, hence so do the Weyl functions.
    """
    Q = np.eye(1, dtype=complex) if Q is None else as_cmatrix(Q)
    return constant_weyl(amp * Q * np.exp(1j * phase), complex(z) - k / 2)


def constant_nwave_weyl(D, zeta0, z):
    """Normalised Weyl function of ``w' = (i z D - zeta0) w`` for constant ``zeta0``.

    ``psi_k`` is the ratio of the top ``k`` and bottom ``m-k`` rows of the
    invariant subspace of ``-(i z D - zeta0)`` belonging to its ``m-k``
    eigenvalues of largest real part, i.e. the directions that dominate
    ``w(x)^{-1} Q`` as ``x`` grows.  Columns are then assembled from the first
    column of each ``psi_k``.
    """
    D = np.asarray(D, dtype=float)
    m = D.size
    Gm = -(1j * z * np.diag(D) - as_cmatrix(zeta0))
    w, vr = np.linalg.eig(Gm)
    order = np.argsort(-w.real)
    phi = np.eye(m, dtype=complex)
    for kk in range(1, m):
        X = vr[:, order[: m - kk]]
        psi = right_divide(X[:kk], X[kk:])
        phi[:kk, kk] = psi[:, 0]
    return phi


@dataclass(frozen=True)
class PlaneWaveNWave:
    """Exact ``m = 2`` nonlinear-optics solution ``rho_12 = a exp(i kappa (x + c t))``.

    For ``m = 2`` the quadratic term of the equation vanishes identically and
    the off-diagonal entry is transported with speed
    ``c = (dh1 - dh2) / (d1 - d2)`` towards decreasing ``x``.
    """

    a: complex
    kappa: float
    D: tuple
    Dhat: tuple

    @property
    def speed(self):
        return (self.Dhat[0] - self.Dhat[1]) / (self.D[0] - self.D[1])

    def rho(self, x, t):
        q = self.a * np.exp(1j * self.kappa * (x + self.speed * t))
        return np.array([[0, q], [np.conj(q), 0]], dtype=complex)

    def weyl(self, z, t=0.0):
        """Normalised Weyl function of the x-slice at time ``t``."""
        d1, d2 = self.D
        q0 = self.a * np.exp(1j * self.kappa * self.speed * t)
        zeta0 = (d1 - d2) * np.array([[0, q0], [-np.conj(q0), 0]], dtype=complex)
        # gauge exp(i kappa x diag(1/2, -1/2)) freezes the phase of q
        shift = 1j * self.kappa * np.diag([0.5, -0.5])
        Gm = -(1j * z * np.diag(self.D) - shift - zeta0)
        w, vr = np.linalg.eig(Gm)
        X = vr[:, [int(np.argmax(w.real))]]
        phi = np.eye(2, dtype=complex)
        phi[0, 1] = X[0, 0] / X[1, 0]
        return phi
