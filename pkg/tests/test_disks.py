import numpy as np
import pytest

from weylstrip.dirac import DiracPotential, propagate_path, propagate_u
from weylstrip.disks import (
    PairParam,
    disk_from_u,
    estimate_weyl,
    membership_form,
    mobius_apply,
    random_contraction,
    weyl_disk,
)
from weylstrip.exceptions import NumericalFailure
from weylstrip.matkernel import opnorm
from weylstrip.oracles import constant_weyl, cw_slice_weyl


def test_constant_oracle_scalar():
    est = estimate_weyl(DiracPotential.constant(1.0), 1j, x_max=15.0)
    assert est.value[0, 0] == pytest.approx(1j * (np.sqrt(2) - 1), abs=1e-10)
    assert est.error_bound < 1e-10


def test_adaptive_radius_reaches_tol():
    est = estimate_weyl(DiracPotential.constant(0.5), 0.5 + 1j, tol=1e-9)
    assert est.error_bound <= 1e-9
    np.testing.assert_allclose(est.value, constant_weyl(0.5, 0.5 + 1j), atol=1e-9)


def test_matrix_constant_oracle():
    v0 = np.array([[0.3, 0.2j], [0.1, -0.4]])
    est = estimate_weyl(DiracPotential.constant(v0), 0.2 + 1.5j)
    np.testing.assert_allclose(est.value, constant_weyl(v0, 0.2 + 1.5j), atol=1e-9)
    assert opnorm(est.value) <= 1


def test_rectangular_shapes():
    v0 = np.array([[0.3], [0.1j]])
    est = estimate_weyl(DiracPotential.constant(v0), 2j)
    assert est.value.shape == (1, 2)


def test_cw_slice_oracle():
    A, k = 0.5, 1.0
    pot = DiracPotential((1, 1), lambda x: np.array([[A * np.exp(1j * k * x)]]),
                         lambda x: np.array([[1j * k * A * np.exp(1j * k * x)]]), bound=A)
    for z in (1j, 1 + 1j, -1 + 2j):
        est = estimate_weyl(pot, z)
        assert abs(est.value[0, 0] - cw_slice_weyl(A, k, z)[0, 0]) <= max(1e-6, 2 * est.error_bound)


def test_rejects_lower_half_plane():
    with pytest.raises(ValueError):
        estimate_weyl(DiracPotential.zero(), -1j)


def test_mobius_images_lie_in_disk():
    rng = np.random.default_rng(3)
    pot = DiracPotential.constant(np.array([[0.4, 0.2]]))
    prop = propagate_u(pot, 1.5, 0.3 + 0.8j)
    c, rl, rr = disk_from_u(prop.u, pot.split, prop.u_inv)
    for _ in range(10):
        omega = random_contraction(rng, (2, 1))
        phi = mobius_apply(prop.u, PairParam(omega), pot.split, prop.u_inv)
        assert np.linalg.eigvalsh(membership_form(prop.u, phi, pot.split)).min() > -1e-9
        # phi = c + rl U rr with |U| <= 1
        U = np.linalg.solve(rl, phi - c) @ np.linalg.inv(rr)
        assert opnorm(U) <= 1 + 1e-8


def test_right_radius_routes_agree():
    pot = DiracPotential.constant(0.6)
    prop = propagate_u(pot, 1.0, 0.5j)
    _, _, rr_inv = disk_from_u(prop.u, pot.split, prop.u_inv)
    _, _, rr_schur = disk_from_u(prop.u, pot.split)
    np.testing.assert_allclose(rr_inv, rr_schur, rtol=1e-8)


def test_radius_shrinks_with_x():
    pot = DiracPotential.constant(0.3)
    props = propagate_path(pot, [0.0, 1.0, 2.0, 4.0], 1j)[1:]
    radii = [weyl_disk(p, pot.split).radius for p in props]
    assert radii[0] > radii[1] > radii[2]


def test_pair_param_validation():
    with pytest.raises((ValueError, NumericalFailure)):
        PairParam(np.array([[2.0]])).check(DiracPotential.zero().split)


def test_random_contraction():
    rng = np.random.default_rng(0)
    assert opnorm(random_contraction(rng, (3, 2))) <= 1
    assert opnorm(random_contraction(rng, (3, 2), boundary=True)) == pytest.approx(1.0)
