"""Hand-derived reference values, each checked against an independent route."""
import numpy as np
import pytest
import scipy.linalg

from weylstrip._ode import integrate_magnus
from weylstrip.dirac import DiracPotential, F_matrix, propagate_u
from weylstrip.disks import PairParam, disk_from_u, membership_form, mobius_apply, random_contraction
from weylstrip.dnls import BoundaryData, CWSolution, DiracField, dnls_residual, evolve_weyl, propagate_R
from weylstrip.jets import XJet, jet_mul, t_derivatives, time_jets, jet_adj, jet_d2
from weylstrip.matkernel import BlockSplit, expm, herm_sqrt, opnorm
from weylstrip.nwave import (
    NWaveConfig,
    NWavePotential,
    build_zeta,
    normalize_gw,
    propagate_Rhat,
    propagate_w_scaled,
    psi_from_phi,
    psi_k,
    weyl_columns,
)
from weylstrip.pdelab import StripGrid, dnls_GF, dnls_zero_curvature_closed, integrate_dnls, zero_curvature_residual

E = np.e
CH, SH = np.cosh(1.0), np.sinh(1.0)
HYP = np.array([[CH, 1j * SH], [-1j * SH, CH]])


def test_herm_sqrt_of_square():
    rng = np.random.default_rng(4)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    s0 = g @ g.conj().T
    np.testing.assert_allclose(herm_sqrt(s0 @ s0), s0, atol=1e-10 * opnorm(s0))


def test_expm_involution():
    # A^2 = I, so exp(A) = cosh(1) I + sinh(1) A
    A = np.array([[0, 1j], [-1j, 0]])
    np.testing.assert_allclose(expm(A), HYP, atol=1e-12)
    assert HYP[0, 0] == pytest.approx(1.54308, abs=1e-5) and HYP[0, 1].imag == pytest.approx(1.17520, abs=1e-5)


def test_unit_potential_at_zero_z():
    np.testing.assert_allclose(propagate_u(DiracPotential.constant(1.0), 1.0, 0.0, tol=1e-12).u, HYP, atol=1e-10)


def test_j_conservation_single():
    rng = np.random.default_rng(6)
    c = rng.normal(size=3) + 1j * rng.normal(size=3)
    c *= 1.5 / np.abs(c).sum()
    ks = np.array([0.5, -1.0, 2.0])
    pot = DiracPotential((1, 1), lambda x: np.array([[c @ np.exp(1j * ks * x)]]),
                         lambda x: np.array([[c @ (1j * ks * np.exp(1j * ks * x))]]))
    u = propagate_u(pot, 5.0, 0.7).u
    j = np.diag([1.0, -1.0])
    assert opnorm(u.conj().T @ j @ u - j) <= 1e-8


def test_mobius_zero_potential():
    u = np.diag([np.exp(-1), np.exp(1)]).astype(complex)
    split = BlockSplit(1, 1)
    # u^{-1}[1; 1] = [e; 1/e]
    assert mobius_apply(u, PairParam(np.array([[1.0]])), split)[0, 0] == pytest.approx(np.exp(-2))
    c, rl, rr = disk_from_u(u, split, np.linalg.inv(u))
    assert abs(c[0, 0]) < 1e-15
    assert rl[0, 0] == pytest.approx(1 / E) and rr[0, 0] == pytest.approx(1 / E)


def test_brute_force_membership():
    rng = np.random.default_rng(9)
    v0 = 0.5 * (rng.normal(size=(2, 1)) + 1j * rng.normal(size=(2, 1)))
    pot = DiracPotential.constant(v0)
    prop = propagate_u(pot, 1.2, 0.4 + 0.9j)
    c, rl, rr = disk_from_u(prop.u, pot.split, prop.u_inv)
    worst = 0.0
    for _ in range(500):
        phi = c + rl @ random_contraction(rng, (1, 2)) @ rr
        worst = min(worst, np.linalg.eigvalsh(membership_form(prop.u, phi, pot.split)).min())
    assert worst >= -1e-8


def test_cw_residual_random_points():
    rng = np.random.default_rng(1)
    pts = rng.uniform([-5, 0], [5, 3], size=(100, 2))
    assert dnls_residual(CWSolution(0.5, 1.0), pts) < 1e-12


def test_R_forward_backward():
    cw = CWSolution(0.5, 1.0)
    z, t = 1 + 1j, 1.0
    R = propagate_R(cw.trace_at(), cw.split, t, z, tol=1e-12).R
    # Y(s) = R(t - s) R(t)^{-1} solves Y' = -F(t - s) Y, so Y(t) = R(t)^{-1}
    back = integrate_magnus(lambda s: -F_matrix(cw.split, cw.v(0.0, t - s), cw.vx(0.0, t - s), z),
                            [0.0, t], 1e-12)[0][-1]
    np.testing.assert_allclose(R @ back, np.eye(2), atol=1e-8)
    # scalar case: tr F = 0, so det R = 1
    assert abs(np.linalg.det(R) - 1) < 1e-8


def test_zero_boundary_evolution():
    zero = lambda t: np.zeros((1, 1), dtype=complex)
    bd = BoundaryData(np.inf, zero, zero)
    z, t = 0.7 + 0.4j, 0.5
    R = propagate_R(bd, BlockSplit(1, 1), t, z)
    phi0 = np.array([[0.3 - 0.2j]])
    np.testing.assert_allclose(evolve_weyl(phi0, R), np.exp(2j * z * z * t) * phi0, atol=1e-10)


def test_jet_of_exponential_and_square():
    e = XJet.exponential(1.0, 1.0, 3)
    np.testing.assert_allclose(e.coeffs[:, 0, 0], [1, 1j, -1, -1j])
    np.testing.assert_allclose(jet_mul(e, e).coeffs[:, 0, 0], [1, 2j, -4, -8j])


def test_constant_profile_has_no_x_derivative():
    jets = t_derivatives(XJet.constant(0.8, 9), 4)
    np.testing.assert_allclose(jets.bx, 0)


def test_first_time_jet_scaling():
    rng = np.random.default_rng(3)
    V = XJet(rng.normal(size=(5, 2, 1)) + 1j * rng.normal(size=(5, 2, 1)))
    lin = 0.5j * jet_d2(V)
    cub = -1j * jet_mul(jet_mul(V, jet_adj(V)), V).truncate(lin.order)
    got = time_jets(V * 2.0, 1)[1]
    np.testing.assert_allclose(got.coeffs, 2 * lin.coeffs + 8 * cub.coeffs, atol=1e-10)


def test_weyl_columns_by_hand():
    a, b, p, q = 0.3 + 1j, -0.5, 2.0 - 1j, 0.25j
    phi = weyl_columns([np.array([[a, b]]), np.array([[p], [q]])])
    np.testing.assert_allclose(phi, [[1, a, p], [0, 1, q], [0, 0, 1]])
    # inverse route: [a, p] [[1, q], [0, 1]]^{-1} = [a, p - a q]
    phi = np.array([[1, a, p], [0, 1, q], [0, 0, 1]])
    np.testing.assert_allclose(psi_from_phi(phi, 1), [[a, p - a * q]])
    np.testing.assert_allclose(psi_from_phi(phi, 2), [[p], [q]])


def test_normalize_lower_triangular_gives_identity():
    raw = np.array([[1, 0, 0], [2 + 1j, 1, 0], [-1, 0.5j, 1]])
    np.testing.assert_allclose(normalize_gw(raw), np.eye(3), atol=1e-14)


def test_constant_rho_hat_evolution_expm():
    rng = np.random.default_rng(2)
    Dh = np.array([2.5, 1.5, 0.5])
    rho = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = 0.1 * (rho + rho.conj().T)
    cfg = NWaveConfig([3, 2, 1], Dh, 0.5)
    z, t = 0.2 - 2j - cfg.M, 0.6
    R = propagate_Rhat(cfg, NWavePotential.constant(rho), t, z).R
    exact = scipy.linalg.expm(t * (1j * z * np.diag(Dh) - build_zeta(Dh, rho)))
    np.testing.assert_allclose(R, exact, rtol=1e-8)


def test_psi_truncations_converge():
    rng = np.random.default_rng(7)
    D = np.array([3.0, 2.0, 1.0])
    rho = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = 0.1 * (rho + rho.conj().T)
    cfg = NWaveConfig(D, D, opnorm(build_zeta(D, rho)))
    z = -1.5j - cfg.M
    props = propagate_w_scaled(cfg, NWavePotential.constant(rho), 4.0, z, points=[1.0, 2.0, 4.0])
    psis = [psi_k(cfg, p, 1) for p in props]
    steps = [opnorm(b - a) for a, b in zip(psis, psis[1:])]
    assert steps[1] < steps[0]


def test_cw_zero_curvature_grid():
    cw = CWSolution(0.5, 1.0)
    xs, ts = np.linspace(0, 5, 10), np.linspace(0, 2, 10)
    assert max(dnls_zero_curvature_closed(cw, x, t, 1j) for x in xs for t in ts) < 1e-8


def test_non_solution_zero_curvature():
    fld = DiracField((1, 1), lambda x, t: x * t + 0j, lambda x, t: t + 0j * x,
                     vt=lambda x, t: x + 0j * t, vxx=lambda x, t: 0j * x)
    assert min(dnls_zero_curvature_closed(fld, x, 1.0, 1j) for x in (0.5, 1.0, 2.0)) > 1e-3


def test_sampled_zero_curvature_refines():
    cw = CWSolution(0.5, 1.0)
    L, T = 6.0, 0.4
    res = []
    for nx in (60, 120, 240):
        grid = StripGrid(L, nx, T, nx // 6)
        hist = integrate_dnls(lambda x: cw.v(x, 0), lambda t: cw.v(0, t), lambda t: cw.v(L, t), grid)
        res.append(zero_curvature_residual(*dnls_GF(hist, 1j), grid))
    assert res[0] > res[1] > res[2]
