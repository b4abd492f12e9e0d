import numpy as np
import pytest

from weylstrip.disks import estimate_weyl
from weylstrip.dnls import (
    BoundaryData,
    CWSolution,
    DiracField,
    dnls_residual,
    evolution_consistency,
    evolve_weyl,
    factorization_residual,
    propagate_R,
)
from weylstrip.exceptions import EvalOutOfRange, OverflowGuard
from weylstrip.matkernel import opnorm
from weylstrip.oracles import cw_slice_weyl

PTS = [(x, t) for x in (0.0, 0.7, 2.3) for t in (0.0, 0.4, 1.1)]


def test_cw_dispersion_relation():
    cw = CWSolution(0.5, 1.0)
    assert cw.omega == pytest.approx(0.75)
    assert dnls_residual(cw, PTS) < 1e-14


def test_cw_with_unitary_factor():
    Q = np.array([[0, 1], [1, 0]], dtype=complex) / 1.0
    cw = CWSolution(0.8, -0.5, Q=Q)
    assert dnls_residual(cw, PTS) < 1e-14
    with pytest.raises(ValueError):
        CWSolution(1.0, 0.0, Q=np.array([[2.0]]))


def test_residual_detects_wrong_frequency():
    A, k, w = 0.5, 1.0, 0.9
    fld = DiracField((1, 1), lambda x, t: A * np.exp(1j * (k * x - w * t)),
                     lambda x, t: 1j * k * A * np.exp(1j * (k * x - w * t)))
    # finite-difference path
    assert dnls_residual(fld, PTS) > 0.1


def test_finite_difference_residual_for_solution():
    cw = CWSolution(0.5, 1.0)
    fld = DiracField(cw.split, cw.v, cw.vx)
    assert dnls_residual(fld, PTS, h=1e-3) < 1e-5


def test_slice_and_trace():
    cw = CWSolution(0.5, 1.0)
    pot = cw.slice_at(0.3)
    assert pot.v(1.0)[0, 0] == pytest.approx(cw.v(1.0, 0.3)[0, 0])
    bd = cw.trace_at()
    assert bd.v0(0.2)[0, 0] == pytest.approx(cw.v(0.0, 0.2)[0, 0])
    with pytest.raises(EvalOutOfRange):
        BoundaryData(1.0, bd.v0, bd.vx0).check(1.5)


def test_evolution_matches_oracle():
    A, k, t = 0.5, 1.0, 0.8
    cw = CWSolution(A, k)
    z = 1 + 1j
    phi0 = estimate_weyl(cw.slice_at(0.0), z).value
    R = propagate_R(cw.trace_at(), cw.split, t, z)
    phi_t = evolve_weyl(phi0, R)
    oracle = cw_slice_weyl(A, k, z, phase=-cw.omega * t)
    assert opnorm(phi_t - oracle) < 1e-7


def test_R_is_j_unitary_for_real_z():
    cw = CWSolution(0.5, 1.0)
    R = propagate_R(cw.trace_at(), cw.split, 1.0, 0.4).R
    j = cw.split.j()
    np.testing.assert_allclose(R.conj().T @ j @ R, j, atol=1e-9)


def test_propagate_R_points_and_guard():
    cw = CWSolution(0.5, 1.0)
    ops = propagate_R(cw.trace_at(), cw.split, None, 1j, points=[0.0, 0.5, 1.0])
    assert [op.t for op in ops] == [0.0, 0.5, 1.0]
    np.testing.assert_allclose(ops[0].R, np.eye(2))
    with pytest.raises(OverflowGuard):
        propagate_R(cw.trace_at(), cw.split, 50.0, 1 + 1j)


def test_factorization_identity():
    cw = CWSolution(0.5, 1.0)
    assert factorization_residual(cw, 1j, 1.0, 0.5, tol=1e-10) < 1e-7
    bad = DiracField((1, 1), lambda x, t: x * t + 0j, lambda x, t: t + 0j * x)
    assert factorization_residual(bad, 1j, 1.0, 0.5) > 1e-3


def test_consistency_report_sorted():
    cw = CWSolution(0.5, 1.0)
    rep = evolution_consistency(cw, [2j, -1 + 2j, 1j], 0.5, tol=1e-8, threads=2)
    assert [p.z for p in rep.points] == [-1 + 2j, 1j, 2j]
    assert rep.max_deviation < 1e-5
