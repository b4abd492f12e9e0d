import numpy as np
import pytest

from weylstrip.dnls import CWSolution
from weylstrip.exceptions import BadConfig, Instability
from weylstrip.oracles import PlaneWaveNWave
from weylstrip.pdelab import (
    StripGrid,
    dnls_GF,
    dnls_zero_curvature_closed,
    integrate_dnls,
    integrate_nwave,
    l2_drift,
    sampled_field,
    zero_curvature_residual,
)

CW = CWSolution(0.5, 1.0)


def cw_run(nx, L=10.0, T=0.5):
    grid = StripGrid(L, nx, T, 10)
    hist = integrate_dnls(lambda x: CW.v(x, 0.0), lambda t: CW.v(0.0, t), lambda t: CW.v(L, t), grid)
    exact = np.array([[CW.v(x, t) for x in grid.x] for t in grid.t])
    return hist, np.abs(hist.values - exact).max()


def test_grid_validation():
    g = StripGrid(2.0, 20, 1.0, 10)
    assert g.dx == pytest.approx(0.1) and g.dt == pytest.approx(0.1)
    assert g.x[-1] == 2.0 and g.t.size == 11
    with pytest.raises(BadConfig):
        StripGrid(-1.0, 20, 1.0, 10)
    with pytest.raises(BadConfig):
        g.check_cfl(1.0, 0.5)


def test_dnls_second_order_convergence():
    errs = [cw_run(nx)[1] for nx in (100, 200)]
    assert errs[1] < errs[0] / 3
    assert errs[1] < 1e-4


def test_dnls_mass_drift_small():
    hist, _ = cw_run(200)
    assert l2_drift(hist) < 1e-4


def test_closed_form_zero_curvature():
    pts = [(x, t) for x in np.linspace(0, 3, 4) for t in np.linspace(0, 1, 4)]
    assert max(dnls_zero_curvature_closed(CW, x, t, 1j) for x, t in pts) < 1e-13


def test_sampled_zero_curvature_small():
    hist, _ = cw_run(200)
    G, F = dnls_GF(hist, 1j)
    assert zero_curvature_residual(G, F, hist.grid) < 1e-2


def test_interpolated_field():
    hist, _ = cw_run(200)
    v, vx = sampled_field(hist)
    assert abs(v(3.3, 0.27)[0, 0] - CW.v(3.3, 0.27)[0, 0]) < 1e-4
    assert abs(vx(3.3, 0.27)[0, 0] - CW.vx(3.3, 0.27)[0, 0]) < 1e-3


def test_nwave_plane_wave_convergence():
    pw = PlaneWaveNWave(0.1, 1.0, (2.0, 1.0), (1.5, 0.5))
    L = 4.0
    errs = []
    for nx in (40, 80):
        grid = StripGrid(L, nx, 0.5, nx // 4)
        hist = integrate_nwave(lambda x: pw.rho(x, 0.0), lambda t: pw.rho(L, t), pw.D, pw.Dhat, grid)
        exact = np.array([[pw.rho(x, t) for x in grid.x] for t in grid.t])
        errs.append(np.abs(hist.values - exact).max())
    assert errs[1] < errs[0] / 3


def test_nwave_three_wave_stays_hermitian():
    def init(x):
        r = np.zeros((3, 3), complex)
        r[0, 1] = 0.05 * np.exp(1j * x)
        r[1, 2] = 0.05 * np.exp(-1j * x)
        r[0, 2] = 0.03
        return r + r.conj().T + np.diag([0.1, 0, -0.1])

    grid = StripGrid(4.0, 80, 0.5, 40)
    hist = integrate_nwave(init, lambda t: init(4.0), [3, 2, 1], [2, 1.2, 0.5], grid)
    vals = hist.values
    np.testing.assert_allclose(vals, np.conj(np.swapaxes(vals, 2, 3)), atol=1e-12)
    np.testing.assert_allclose(vals[-1, :, 0, 0], 0.1)


def test_nwave_rejects_bad_setup():
    grid = StripGrid(4.0, 40, 0.5, 2)
    with pytest.raises(BadConfig):
        integrate_nwave(lambda x: np.zeros((2, 2)), lambda t: np.zeros((2, 2)), [2, 1], [1.5, 0.5], grid)
    grid = StripGrid(4.0, 40, 0.5, 40)
    with pytest.raises(BadConfig):
        integrate_nwave(lambda x: np.zeros((2, 2)), lambda t: np.zeros((2, 2)), [2, 1], [0.5, 1.5], grid)


def test_dnls_blowup_detected():
    grid = StripGrid(1.0, 10, 1.0, 2)
    with pytest.raises(Instability):
        integrate_dnls(lambda x: np.array([[1e-3]]), lambda t: np.array([[1.0]]),
                       lambda t: np.array([[1.0]]), grid)
