"""Weyl theory of the N-wave auxiliary system ``w_x = (i z D - zeta) w``.

Spectral parameters live in the lower half-plane ``Im z < -M``.  There the
fundamental solution grows like ``exp(|Im z| d_1 x)``, so it is never stored
directly: the integrator works with ``Mfac = w exp(-i z x D)`` and its
inverse, and the diagonal exponentials are reapplied entrywise where the
formulas need them.  With ``X = Mfac^{-1} [0; I]``

    psi_k(x, z)_{ij} = exp(i z x (d_{k+j} - d_i)) (X_1 X_2^{-1})_{ij},

and every exponential factor has modulus at most one.

The normalised Weyl function ``phi`` is unit upper triangular; its column
``k+1`` above the diagonal is the first column of the limit ``psi_k``.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._ode import DEFAULT_TOL, OVERFLOW_CAP, integrate_magnus
from .exceptions import (
    BadK,
    ConfigError,
    DimensionMismatch,
    OverflowGuard,
    SingularBlock,
    SingularTrailingBlock,
    SingularX2,
)
from .matkernel import COND_MAX, as_cmatrix, check_hermitian, opnorm, right_divide

logger = logging.getLogger(__name__)

CONTRACTION_SLACK = 1e-10


@dataclass
class NWaveConfig:
    """Coefficients and bounds of an N-wave problem.

    ``M`` defaults to ``1.1 * max_k 2 M0 / (d_k - d_{k+1}) + 0.1``.
    """

    D: np.ndarray
    Dhat: np.ndarray
    M0: float
    M: Optional[float] = None
    Mhat: float = 0.0

    def __post_init__(self):
        self.D = np.asarray(self.D, dtype=float).ravel()
        self.Dhat = np.asarray(self.Dhat, dtype=float).ravel()
        if self.D.size < 2:
            raise ConfigError("need m >= 2")
        if self.Dhat.size != self.D.size:
            raise ConfigError(f"D has {self.D.size} entries but Dhat has {self.Dhat.size}")
        for name, d in (("D", self.D), ("Dhat", self.Dhat)):
            if np.any(np.diff(d) >= 0) or d[-1] <= 0:
                raise ConfigError(
                    f"{name} must satisfy {name}_1 > {name}_2 > ... > {name}_m > 0 "
                    f"(strict decreasing ordering violated: {d.tolist()})")
        if self.M0 < 0 or self.Mhat < 0:
            raise ConfigError("M0 and Mhat must be non-negative")
        need = self.min_M
        if self.M is None:
            self.M = 1.1 * need + 0.1
        if not self.M > need:
            raise ConfigError(
                f"M={self.M:g} must exceed max_k 2*M0/(d_k - d_(k+1)) = {need:g}")

    @property
    def m(self):
        return self.D.size

    @property
    def min_M(self):
        return float(np.max(2 * self.M0 / -np.diff(self.D)))

    def check_z(self, z):
        z = complex(z)
        if not z.imag < -self.M:
            raise ValueError(f"z={z} must satisfy Im z < -M = {-self.M:g}")
        return z


def build_zeta(D, rho, rtol=1e-12):
    """``[D, rho] = D rho - rho D`` for Hermitian ``rho``."""
    d = np.asarray(D, dtype=float).ravel() if np.ndim(D) <= 1 else np.real(np.diag(D))
    rho = check_hermitian(rho, rtol, "rho")
    if rho.shape[0] != d.size:
        raise DimensionMismatch(f"rho is {rho.shape}, D has {d.size} entries")
    return (d[:, None] - d[None, :]) * rho


class NWavePotential:
    """``rho(x, t)`` Hermitian; ``rho_hat(t) = rho(0, t)`` unless given."""

    def __init__(self, rho, rho_hat=None):
        self._rho = rho
        self._rho_hat = rho_hat

    def rho(self, x, t=0.0):
        return check_hermitian(self._rho(x, t), name="rho")

    def rho_hat(self, t):
        if self._rho_hat is None:
            return self.rho(0.0, t)
        return check_hermitian(self._rho_hat(t), name="rho_hat")

    def zeta(self, D, x, t=0.0):
        return build_zeta(D, self.rho(x, t))

    def zeta_hat(self, Dhat, t):
        return build_zeta(Dhat, self.rho_hat(t))

    @classmethod
    def constant(cls, rho):
        r = as_cmatrix(rho, "rho")
        return cls(lambda x, t: r)

    @classmethod
    def zero(cls, m):
        r = np.zeros((m, m), dtype=complex)
        return cls(lambda x, t: r)


@dataclass
class ScaledPropagation:
    """``w(x, z) = Mfac exp(i z x D)`` together with ``Mfac^{-1}``."""

    x: float
    z: complex
    Mfac: np.ndarray
    Mfac_inv: np.ndarray = field(repr=False)
    D: np.ndarray = field(repr=False, default=None)
    logdet: complex = 0j
    nsteps: int = 0

    def w(self):
        return self.Mfac * np.exp(1j * self.z * self.x * self.D)[None, :]

    def liouville_defect(self):
        """Relative defect of ``det w = exp(i z x tr D)``."""
        expected = 1j * self.z * self.x * self.D.sum()
        return abs(np.expm1(self.logdet - expected))


def _nwave_generator(D, zeta_fn, z):
    izD = np.diag(1j * z * D)

    def gen(s):
        return izD - zeta_fn(s)
    return gen


def propagate_w_scaled(cfg, pot, x, z, t=0.0, tol=DEFAULT_TOL, points=None, prev=None):
    """Integrate the scaled fundamental solution up to ``x``.

    ``points`` returns a list for several increasing ``x``; ``prev`` continues an
    earlier :class:`ScaledPropagation`.
    """
    z = cfg.check_z(z)
    D = cfg.D
    xs = [float(x)] if points is None else [float(p) for p in points]
    if abs(z.imag) * xs[-1] * (D[0] - D[-1]) > OVERFLOW_CAP:
        raise OverflowGuard(
            f"|Im z| x (d_1 - d_m) = {abs(z.imag) * xs[-1] * (D[0] - D[-1]):g} exceeds {OVERFLOW_CAP:g}")
    gen = _nwave_generator(D, lambda s: pot.zeta(D, s, t), z)
    start = 0.0 if prev is None else prev.x
    pts = [start] + [p for p in xs if p > start]
    kw = {} if prev is None else dict(y0=prev.Mfac, y0inv=prev.Mfac_inv)
    vals, invs, lds, n = integrate_magnus(gen, pts, tol, frame=1j * z * D, **kw)
    base_ld = 0j if prev is None else prev.logdet
    base_n = 0 if prev is None else prev.nsteps
    by_x = {p: (v, vi, ld) for p, v, vi, ld in zip(pts, vals, invs, lds)}
    out = []
    for p in xs:
        if p < start:
            raise ValueError(f"x={p:g} lies before the starting point {start:g}")
        v, vi, ld = by_x[p]
        out.append(ScaledPropagation(p, z, v, vi, D, base_ld + ld, base_n + n))
    return out[0] if points is None else out


def psi_k(cfg, prop, k):
    """``psi_k(x, z)`` with the canonical parameter ``Q_k = [0; I_{m-k}]``."""
    m = cfg.m
    if not (isinstance(k, (int, np.integer)) and 1 <= k < m):
        raise BadK(f"k must be an integer in [1, {m - 1}], got {k!r}")
    X = prop.Mfac_inv[:, k:]
    # rows of X carry the growth exp(|Im z| x d_i); equilibrate before the
    # solve (column scaling cancels in the ratio, row scaling is undone below)
    X = X / np.linalg.norm(X, axis=0)[None, :]
    X1, X2 = X[:k], X[k:]
    rs = np.linalg.norm(X2, axis=1)
    Y = X2 / rs[:, None]
    c = np.linalg.cond(Y)
    if not np.isfinite(c) or c > COND_MAX:
        raise SingularX2(f"X_2 condition number {c:.3e} at x={prop.x:g}")
    ratio = right_divide(X1, Y, cond_max=np.inf) / rs[None, :]
    d = cfg.D
    expo = np.exp(1j * prop.z * prop.x * (d[None, k:] - d[:k, None]))
    psi = expo * ratio
    norm = opnorm(psi)
    if norm > 1 + CONTRACTION_SLACK:
        logger.warning("psi_%d at x=%g, z=%s has norm %.12g > 1", k, prop.x, prop.z, norm)
    return psi


def weyl_columns(psis):
    """Unit upper-triangular ``phi`` from ``psi_1, ..., psi_{m-1}``."""
    psis = [as_cmatrix(p, f"psi_{i + 1}") for i, p in enumerate(psis)]
    m = len(psis) + 1
    phi = np.eye(m, dtype=complex)
    for i, p in enumerate(psis):
        k = i + 1
        if p.shape != (k, m - k):
            raise DimensionMismatch(f"psi_{k} must be {k}x{m - k}, got {p.shape}")
        phi[:k, k] = p[:, 0]
    return phi


def psi_from_phi(phi, k):
    """Block ratio ``phi[:k, k:] phi[k:, k:]^{-1}``."""
    phi = as_cmatrix(phi, "phi")
    m = phi.shape[0]
    if phi.shape != (m, m):
        raise DimensionMismatch("phi must be square")
    if not (1 <= k < m):
        raise BadK(f"k must be in [1, {m - 1}], got {k}")
    den = phi[k:, k:]
    c = np.linalg.cond(den)
    if not np.isfinite(c) or c > COND_MAX:
        raise SingularBlock(f"lower-right block has condition number {c:.3e}")
    return np.linalg.solve(den.T, phi[:k, k:].T).T


def is_normalized(phi, atol=1e-12):
    """Unit diagonal and zeros below it."""
    phi = np.asarray(phi)
    low = np.tril(phi, -1)
    return bool(np.abs(np.diag(phi) - 1).max() <= atol and np.abs(low).max(initial=0.0) <= atol)


def normalize_gw(raw):
    """Normalise a non-normalised GW sample ``raw`` by a lower-triangular factor.

    Column ``m-k`` (0-based) of the factor is ``[0; P_k^{-1} e_1]`` where
    ``P_k`` is the trailing ``k x k`` block of ``raw``.
    """
    raw = as_cmatrix(raw, "raw")
    m = raw.shape[0]
    if raw.shape != (m, m):
        raise DimensionMismatch("raw must be square")
    hat = np.zeros((m, m), dtype=complex)
    for k in range(1, m + 1):
        P = raw[m - k:, m - k:]
        c = np.linalg.cond(P)
        if not np.isfinite(c) or c > COND_MAX:
            raise SingularTrailingBlock(k)
        e1 = np.zeros(k, dtype=complex)
        e1[0] = 1.0
        hat[m - k:, m - k] = np.linalg.solve(P, e1)
    phi = raw @ hat
    # entries fixed by construction; remove rounding noise
    phi[np.tril_indices(m, -1)] = 0.0
    phi[np.diag_indices(m)] = 1.0
    return phi


@dataclass
class GWEstimate:
    z: complex
    phi: np.ndarray
    psis: list = field(repr=False)
    error_estimate: float = np.inf
    x_used: float = 0.0
    converged: bool = False


def estimate_gw(cfg, pot, z, t=0.0, tol=1e-8, x_start=1.0, int_tol=DEFAULT_TOL):
    """Normalised Weyl function at ``z`` by doubling ``x``.

    The limit of ``psi_k(x)`` is approximated by its value at the last ``x``;
    the error estimate is the change from the previous doubling, a heuristic
    stopping rule (no convergence rate is certified).
    """
    z = cfg.check_z(z)
    gap = cfg.D[0] - cfg.D[-1]
    cap = OVERFLOW_CAP / (abs(z.imag) * gap)
    x = min(x_start, cap)
    prop = propagate_w_scaled(cfg, pot, x, z, t, int_tol)
    psis = [psi_k(cfg, prop, k) for k in range(1, cfg.m)]
    err = np.inf
    while x < cap:
        x = min(2 * x, cap)
        prop = propagate_w_scaled(cfg, pot, x, z, t, int_tol, prev=prop)
        new = [psi_k(cfg, prop, k) for k in range(1, cfg.m)]
        err = max(opnorm(a - b) for a, b in zip(new, psis))
        psis = new
        if err <= tol:
            break
    converged = err <= tol
    if not converged:
        logger.warning("psi limits at z=%s changed by %.3e at x=%g (tol %.1e)", z, err, x, tol)
    return GWEstimate(z, weyl_columns(psis), psis, err, x, converged)


@dataclass
class NWaveEvolution:
    """``R(t, z) = Rfac exp(i z t Dhat)`` solving ``R_t = (i z Dhat - [Dhat, rho_hat]) R``."""

    t: float
    z: complex
    Rfac: np.ndarray
    Rfac_inv: np.ndarray = field(repr=False)
    Dhat: np.ndarray = field(repr=False, default=None)
    nsteps: int = 0

    @property
    def R(self):
        return self.Rfac * np.exp(1j * self.z * self.t * self.Dhat)[None, :]

    def conjugated(self, phi):
        """``R phi exp(-i z t Dhat)`` without forming ``R``."""
        e = 1j * self.z * self.t * self.Dhat
        return self.Rfac @ (np.exp(e[:, None] - e[None, :]) * phi)


def propagate_Rhat(cfg, pot, t, z, tol=DEFAULT_TOL, points=None):
    z = cfg.check_z(z)
    Dh = cfg.Dhat
    ts = [float(t)] if points is None else [float(p) for p in points]
    if abs(z.imag) * ts[-1] * Dh[0] > OVERFLOW_CAP:
        raise OverflowGuard(f"|Im z| t dhat_1 = {abs(z.imag) * ts[-1] * Dh[0]:g} exceeds {OVERFLOW_CAP:g}")
    gen = _nwave_generator(Dh, lambda s: pot.zeta_hat(Dh, s), z)
    pts = [0.0] + [p for p in ts if p > 0]
    vals, invs, _, n = integrate_magnus(gen, pts, tol, frame=1j * z * Dh)
    by_t = dict(zip(pts, zip(vals, invs)))
    out = [NWaveEvolution(p, z, *by_t[p], Dh, n) for p in ts]
    return out[0] if points is None else out


def evolve_nwave(cfg, phi0, R):
    """Weyl function at time ``t`` from ``phi0`` and the evolution operator.

    ``R`` is an :class:`NWaveEvolution` (scaled arithmetic) or a plain matrix
    applied literally, which is what composition checks need.
    """
    phi0 = as_cmatrix(phi0, "phi0")
    m = cfg.m
    if phi0.shape != (m, m):
        raise DimensionMismatch(f"phi0 must be {m}x{m}")
    Y = R.conjugated(phi0) if isinstance(R, NWaveEvolution) else as_cmatrix(R, "R") @ phi0
    psis = []
    for k in range(1, m):
        top, bot = Y[:k, k:], Y[k:, k:]
        psis.append(right_divide(top, bot, what=f"block k={k}"))
    return weyl_columns(psis)


def psi_evolution_bound(cfg, R, psi0, k):
    """Left side of the growth bound for ``R [psi_k(0); I]``; at most 2 in theory."""
    z, t = R.z, R.t
    col = np.vstack([psi0, np.eye(cfg.m - k)])
    # exp(i(conj z - z) dhat_{k+1} t) = exp(2 Im z dhat_{k+1} t)
    scale = np.exp(2 * z.imag * cfg.Dhat[k] * t - 4 * cfg.Mhat * t)
    v = R.R @ col
    return float(scale * opnorm(v.conj().T @ v))


def gw_growth_sup(cfg, pot, phi_fn, xs, zs, t=0.0, tol=DEFAULT_TOL):
    """``max ||w(x,z) phi(z) exp(-i z x D)||`` over a finite grid (diagnostic)."""
    worst = 0.0
    for z in zs:
        props = propagate_w_scaled(cfg, pot, max(xs), z, t, tol, points=sorted(xs))
        phi = phi_fn(z)
        for p in props:
            e = 1j * p.z * p.x * cfg.D
            val = opnorm(p.Mfac @ (np.exp(e[:, None] - e[None, :]) * phi))
            worst = max(worst, val)
    logger.info("GW growth sup over %d x %d grid: %.6g", len(xs), len(zs), worst)
    return worst


def evolution_growth_sup(cfg, pot, phi_fn, ts, zs, tol=DEFAULT_TOL):
    """``max ||R(t,z) phi0(z) exp(-i z t Dhat)||`` over a finite grid (diagnostic)."""
    worst = 0.0
    for z in zs:
        phi = phi_fn(z)
        for R in propagate_Rhat(cfg, pot, max(ts), z, tol, points=sorted(ts)):
            worst = max(worst, opnorm(R.conjugated(phi)))
    return worst


def truncated_l2(phi_fn, eta, xi_max, n=401):
    """``int ||(phi - I)^*(phi - I)|| d xi`` over ``[-xi_max, xi_max]`` on ``Im z = eta``.

    A truncated proxy; finiteness on the whole line is not certified.
    """
    xis = np.linspace(-xi_max, xi_max, n)
    vals = []
    for xi in xis:
        d = phi_fn(complex(xi, eta))
        d = d - np.eye(d.shape[0])
        vals.append(opnorm(d.conj().T @ d))
    return float(np.trapezoid(vals, xis))


@dataclass
class SolvabilityReport:
    sup_z_defect: float
    min_abs_det: float
    phi1_estimate: np.ndarray
    l2_tail: float


def solvability_predicates(phi_fn, eta, xi_max, n=201):
    """Sampled versions of the sufficient conditions for inverse-problem solvability.

    Reports ``sup |z (phi - I)|``, ``min |det phi|``, the leading coefficient
    ``phi_1 ~ z (phi - I)`` at the largest ``|xi|`` and the truncated L2 norm
    of ``z (phi - I) - phi_1``.  Nothing here is a proof.
    """
    xis = np.linspace(-xi_max, xi_max, n)
    zs = xis + 1j * eta
    vals = [phi_fn(z) for z in zs]
    eye = np.eye(vals[0].shape[0])
    zdef = [z * (v - eye) for z, v in zip(zs, vals)]
    phi1 = 0.5 * (zdef[0] + zdef[-1])
    tail = [opnorm(d - phi1) ** 2 for d in zdef]
    return SolvabilityReport(
        max(opnorm(d) for d in zdef),
        min(abs(np.linalg.det(v)) for v in vals),
        phi1,
        float(np.trapezoid(tail, xis)),
    )


def distinguishes(cfg, pot_a, pot_b, zs, threshold=1e-6, tol=1e-8):
    """True when the two potentials give Weyl samples differing by more than ``threshold``."""
    diff = 0.0
    for z in zs:
        a = estimate_gw(cfg, pot_a, z, tol=tol).phi
        b = estimate_gw(cfg, pot_b, z, tol=tol).phi
        diff = max(diff, opnorm(a - b))
    return diff > threshold, diff


def nwave_weyl_grid(cfg, pot, zs, t=0.0, tol=1e-8, threads=1):
    """:func:`estimate_gw` on a grid, sorted by ``(Re z, Im z)``."""
    zs = sorted((complex(z) for z in zs), key=lambda z: (z.real, z.imag))

    def work(z):
        return estimate_gw(cfg, pot, z, t, tol)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(work, zs))
    return [work(z) for z in zs]


def factorization_residual(cfg, rho_fn, z, x, t, tol=DEFAULT_TOL):
    """Relative defect of ``w(x,t) R(0,t) = R(x,t) w(x,0)`` for a field ``rho(x, t)``.

    The two sides grow like ``exp(|Im z| (d_1 x + dh_1 t))``; the defect is
    divided by the norm of the left side.
    """
    z = complex(z)
    D, Dh = cfg.D, cfg.Dhat
    if abs(z.imag) * (D[0] * x + Dh[0] * t) > OVERFLOW_CAP:
        raise OverflowGuard("factorization check would overflow; reduce x, t or |Im z|")

    def gx(tt):
        return _nwave_generator(D, lambda s: build_zeta(D, rho_fn(s, tt)), z)

    def gt(xx):
        return _nwave_generator(Dh, lambda s: build_zeta(Dh, rho_fn(xx, s)), z)

    w_t = integrate_magnus(gx(t), [0.0, x], tol)[0][-1]
    w_0 = integrate_magnus(gx(0.0), [0.0, x], tol)[0][-1]
    R_0 = integrate_magnus(gt(0.0), [0.0, t], tol)[0][-1]
    R_x = integrate_magnus(gt(x), [0.0, t], tol)[0][-1]
    lhs = w_t @ R_0
    return opnorm(lhs - R_x @ w_0) / opnorm(lhs)
