"""Boundary jets of the defocusing NLS solution from the initial profile.

An :class:`XJet` stores raw x-derivatives ``f(0), f'(0), ..., f^(N)(0)`` of a
matrix function.  Differentiating ``2 v_t = i(v_xx - 2 v v* v)`` k times in
``t`` and swapping the order of differentiation gives

    T_{k+1} = (i/2) (T_k'' - 2 sum_{a+b+c=k} k!/(a! b! c!) T_a T_b* T_c),

where ``T_k`` is the x-jet of ``d^k v / dt^k`` at ``t = 0``.  Each step eats
two x-orders, so ``r`` time derivatives of ``v`` and ``v_x`` at the corner
need an initial jet of order ``2r + 1``.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .exceptions import DimensionMismatch, InsufficientOrder, OrderUnderflow, OutsideTrustRadius

logger = logging.getLogger(__name__)


class XJet:
    """Truncated x-jet ``(f(0), f'(0), ..., f^(N)(0))`` of a matrix function."""

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[:, None, None]
        if c.ndim != 3 or c.shape[0] < 1:
            raise DimensionMismatch(f"jet coefficients must have shape (N+1, m1, m2), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("jet coefficients must be finite")
        self.coeffs = c

    @property
    def order(self):
        return self.coeffs.shape[0] - 1

    @property
    def shape(self):
        return self.coeffs.shape[1:]

    def __getitem__(self, l):
        return self.coeffs[l]

    def truncate(self, order):
        if order > self.order:
            raise OrderUnderflow(f"cannot raise jet order {self.order} to {order}")
        return XJet(self.coeffs[: order + 1])

    def __add__(self, other):
        n = min(self.order, other.order)
        return XJet(self.coeffs[: n + 1] + other.coeffs[: n + 1])

    def __sub__(self, other):
        n = min(self.order, other.order)
        return XJet(self.coeffs[: n + 1] - other.coeffs[: n + 1])

    def __mul__(self, s):
        return XJet(self.coeffs * s)

    __rmul__ = __mul__

    def __repr__(self):
        return f"XJet(order={self.order}, shape={self.shape})"

    @classmethod
    def from_function(cls, derivs, order):
        """Jet from a callable ``l -> l-th derivative at 0``."""
        return cls([derivs(l) for l in range(order + 1)])

    @classmethod
    def constant(cls, value, order):
        value = np.atleast_2d(np.asarray(value, dtype=complex))
        c = np.zeros((order + 1,) + value.shape, dtype=complex)
        c[0] = value
        return cls(c)

    @classmethod
    def exponential(cls, amp, k, order, Q=None):
        """Jet of ``amp * Q * exp(i k x)``."""
        Q = np.eye(1, dtype=complex) if Q is None else np.atleast_2d(np.asarray(Q, dtype=complex))
        return cls([amp * (1j * k) ** l * Q for l in range(order + 1)])


def jet_mul(a, b):
    """Leibniz product ``(fg)^(l) = sum_i C(l, i) f^(i) g^(l-i)``."""
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply jets of shapes {a.shape} and {b.shape}")
    n = min(a.order, b.order)
    out = np.zeros((n + 1, a.shape[0], b.shape[1]), dtype=complex)
    for l in range(n + 1):
        for i in range(l + 1):
            out[l] += math.comb(l, i) * (a.coeffs[i] @ b.coeffs[l - i])
    return XJet(out)


def jet_adj(a):
    return XJet(np.conj(np.swapaxes(a.coeffs, 1, 2)))


def jet_d1(a):
    if a.order < 1:
        raise OrderUnderflow("jet_d1 needs order >= 1")
    return XJet(a.coeffs[1:])


def jet_d2(a):
    if a.order < 2:
        raise OrderUnderflow(f"jet_d2 needs order >= 2, got {a.order}")
    return XJet(a.coeffs[2:])


def _multinomial(k, a, b):
    c = k - a - b
    return math.factorial(k) // (math.factorial(a) * math.factorial(b) * math.factorial(c))


def _cubic(T, k):
    """x-jet of ``d^k/dt^k (v v* v)`` at ``t = 0``."""
    adj = [jet_adj(x) for x in T[: k + 1]]
    acc = None
    for a in range(k + 1):
        for b in range(k + 1 - a):
            c = k - a - b
            term = _multinomial(k, a, b) * jet_mul(T[a], jet_mul(adj[b], T[c]))
            acc = term if acc is None else acc + term
    return acc


def _cubic_variation(S, T, k):
    """x-jet of ``d^k/dt^k`` of the x-derivative of ``v v* v``."""
    acc = None
    for a in range(k + 1):
        for b in range(k + 1 - a):
            c = k - a - b
            w = _multinomial(k, a, b)
            term = (jet_mul(S[a], jet_mul(jet_adj(T[b]), T[c]))
                    + jet_mul(T[a], jet_mul(jet_adj(S[b]), T[c]))
                    + jet_mul(T[a], jet_mul(jet_adj(T[b]), S[c])))
            term = w * term
            acc = term if acc is None else acc + term
    return acc


@dataclass
class BoundaryJets:
    """``b[k] = d^k v/dt^k (0, 0)`` and ``bx[k] = d^k v_x/dt^k (0, 0)``."""

    r: int
    b: np.ndarray
    bx: np.ndarray
    trust_radius: Optional[float] = None
    t_jets: list = field(default_factory=list, repr=False)


def time_jets(init, r):
    """The x-jets ``T_0, ..., T_r`` of ``d^k v / dt^k`` at ``t = 0``."""
    T = [init]
    for k in range(r):
        T.append(0.5j * (jet_d2(T[k]) - 2 * _cubic(T, k)))
    return T


def t_derivatives(init, r, trust_radius=None):
    """Corner values ``d^k_t v(0,0)``, ``d^k_t v_x(0,0)`` for ``k <= r``.

    Parameters
    ----------
    init : XJet
        Jet of the initial profile at ``x = 0``; order must be at least ``2r+1``.
    r : int
    trust_radius : float, optional
        Declared radius for later :func:`taylor_boundary` evaluation.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    if init.order < 2 * r + 1:
        raise InsufficientOrder(
            f"r={r} needs an initial jet of order {2 * r + 1}, got {init.order}")
    T = time_jets(init, r)
    b = np.array([t.coeffs[0] for t in T])
    bx = np.array([t.coeffs[1] for t in T])
    return BoundaryJets(r, b, bx, trust_radius, T)


def mixed_derivative_jets(init, r):
    """``d^k_t v_x(0,0)`` computed by differentiating in ``x`` first.

    The x-derivative of the initial profile is pushed through the linearised
    recursion; agreement with :func:`t_derivatives` is the finite-jet form of
    ``v_xt = v_tx``.
    """
    if init.order < 2 * r + 1:
        raise InsufficientOrder(
            f"r={r} needs an initial jet of order {2 * r + 1}, got {init.order}")
    T = time_jets(init, r)
    S = [jet_d1(init)]
    for k in range(r):
        S.append(0.5j * (jet_d2(S[k]) - 2 * _cubic_variation(S, T, k)))
    return np.array([s.coeffs[0] for s in S])


class Verdict(str, Enum):
    QUASI_ANALYTIC = "quasi-analytic"
    NOT_QUASI_ANALYTIC = "not-quasi-analytic"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class QuasiClass:
    """Class ``C({M_k})``: ``|f^(k)| <= c^{k+1} M_k`` on the interval.

    Give either ``gevrey`` (``M_k = (k!)^s``) or an explicit positive ``sequence``
    ``M_0, M_1, ...``.
    """

    sequence: Optional[Sequence[float]] = None
    gevrey: Optional[float] = None
    c: float = 1.0

    def __post_init__(self):
        if (self.sequence is None) == (self.gevrey is None):
            raise ValueError("give exactly one of sequence or gevrey")
        if self.sequence is not None:
            seq = np.asarray(self.sequence, dtype=float)
            if seq.ndim != 1 or seq.size < 2 or np.any(~(seq > 0)) or not np.all(np.isfinite(seq)):
                raise ValueError("sequence must hold at least two finite positive values")
            object.__setattr__(self, "sequence", tuple(float(s) for s in seq))
        if self.c < 0:
            raise ValueError("c must be non-negative")

    def log_m(self, k):
        if self.gevrey is not None:
            return self.gevrey * gammaln(k + 1)
        return math.log(self.sequence[k])

    def m(self, k):
        return math.exp(self.log_m(k))


def carleman_partial_sums(seq):
    """Partial sums of ``sum_{n>=1} 1/L_n`` with ``L_n = inf_{k>=n} M_k^{1/k}``.

    The infimum is taken over the available terms only, so the values are a
    diagnostic for finite data.
    """
    seq = np.asarray(seq, dtype=float)
    k = np.arange(1, seq.size)
    roots = np.exp(np.log(seq[1:]) / k)
    tail_inf = np.minimum.accumulate(roots[::-1])[::-1]
    return np.cumsum(1.0 / tail_inf)


def _registered_form(seq, rtol=1e-10):
    """Match an explicit sequence against constant, geometric or Gevrey forms."""
    logs = np.log(np.asarray(seq, dtype=float))
    k = np.arange(logs.size)
    scale = max(1.0, np.abs(logs).max())
    if np.ptp(logs) <= rtol * scale:
        return "constant", None
    # log M_k = log C + k log q
    A = np.column_stack([np.ones_like(k, dtype=float), k])
    coef, *_ = np.linalg.lstsq(A, logs, rcond=None)
    if logs.size >= 3 and np.abs(A @ coef - logs).max() <= rtol * scale:
        return "geometric", coef[1]
    # log M_k = log C + s log k!
    A = np.column_stack([np.ones_like(k, dtype=float), gammaln(k + 1)])
    coef, *_ = np.linalg.lstsq(A, logs, rcond=None)
    if logs.size >= 3 and np.abs(A @ coef - logs).max() <= rtol * scale:
        return "gevrey", coef[1]
    return None, None


def quasianalytic_check(qc):
    """Denjoy-Carleman verdict for the class.

    Gevrey classes are decided exactly: ``sum 1/L_n`` diverges iff ``s <= 1``.
    An explicit finite sequence is decided only when it matches a registered
    closed form (constant, geometric, Gevrey); otherwise the answer is
    ``inconclusive`` and the partial sums are logged.
    """
    if qc.gevrey is not None:
        s = qc.gevrey
    else:
        form, param = _registered_form(qc.sequence)
        if form in ("constant", "geometric"):
            # L_n tends to a positive constant
            return Verdict.QUASI_ANALYTIC
        if form is None:
            sums = carleman_partial_sums(qc.sequence)
            logger.info("no registered form; partial Carleman sums end at %.6g after %d terms",
                        sums[-1], sums.size)
            return Verdict.INCONCLUSIVE
        s = param
    return Verdict.QUASI_ANALYTIC if s <= 1 else Verdict.NOT_QUASI_ANALYTIC


class TaylorBoundary(tuple):
    """``(v(0,t), v_x(0,t))`` from truncated series; ``remainder`` is ``None``
    unless a class bound was supplied."""

    def __new__(cls, v, vx, remainder=None):
        self = super().__new__(cls, (v, vx))
        self.remainder = remainder
        return self

    @property
    def v(self):
        return self[0]

    @property
    def vx(self):
        return self[1]


def taylor_remainder(qc, r, t):
    """Lagrange bound ``c^{r+2} M_{r+1} |t|^{r+1} / (r+1)!``."""
    n = r + 1
    logb = (n + 1) * math.log(qc.c) if qc.c > 0 else -np.inf
    logb += qc.log_m(n) + n * math.log(abs(t)) - gammaln(n + 1) if t != 0 else -np.inf
    return float(np.exp(logb))


def taylor_boundary(jets, t, qc=None):
    """Truncated Taylor series of the boundary traces around ``t = 0``."""
    if jets.trust_radius is not None and abs(t) > jets.trust_radius:
        raise OutsideTrustRadius(f"|t|={abs(t):g} exceeds trust radius {jets.trust_radius:g}")
    w = np.array([t ** k / math.factorial(k) for k in range(jets.r + 1)])
    v = np.tensordot(w, jets.b, axes=1)
    vx = np.tensordot(w, jets.bx, axes=1)
    rem = None if qc is None else taylor_remainder(qc, jets.r, t)
    return TaylorBoundary(v, vx, rem)
