"""scikit-learn style wrappers.

The learning vocabulary maps loosely: ``fit`` takes the potential (or the
initial profile) and ``predict``/``transform`` evaluate at spectral points or
produce boundary jets.  Hyper-parameters are constructor arguments, so
``get_params``/``set_params`` and ``clone`` work as usual.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_complex_array, check_z_grid
from .dirac import DiracPotential
from .disks import estimate_weyl
from .jets import XJet, t_derivatives, taylor_boundary
from .nwave import NWaveConfig, NWavePotential, estimate_gw


class DiracWeylEstimator(BaseEstimator):
    """Weyl function of a Dirac system from potential samples.

    Parameters
    ----------
    tol : float
        Integrator tolerance and target ball radius.
    x_max : float or None
        Fixed truncation point; ``None`` doubles until the radius is below ``tol``.
    """

    def __init__(self, tol=1e-10, x_max=None):
        self.tol = tol
        self.x_max = x_max

    def fit(self, X, y=None):
        """``X`` is a :class:`DiracPotential` or samples of shape ``(n, m1, m2)``;
        ``y`` then holds the sample abscissae."""
        if isinstance(X, DiracPotential):
            self.potential_ = X
        else:
            vals = check_complex_array(X, None, "X", min_samples=4)
            if y is None:
                raise ValueError("sampled potentials need their x grid as y")
            xs = np.asarray(y, dtype=float)
            self.potential_ = DiracPotential.sampled(xs, vals)
        self.split_ = self.potential_.split
        return self

    def predict(self, Z):
        check_is_fitted(self, "potential_")
        Z = check_z_grid(Z)
        self.error_bounds_ = np.empty(Z.size)
        out = []
        for i, z in enumerate(Z):
            est = estimate_weyl(self.potential_, z, x_max=self.x_max, tol=self.tol)
            out.append(est.value)
            self.error_bounds_[i] = est.error_bound
        return np.array(out)


class NWaveWeylEstimator(BaseEstimator):
    """Normalised Weyl function of the N-wave auxiliary system."""

    def __init__(self, D=(2.0, 1.0), Dhat=(1.5, 0.5), M0=0.0, M=None, tol=1e-8):
        self.D = D
        self.Dhat = Dhat
        self.M0 = M0
        self.M = M
        self.tol = tol

    def fit(self, X, y=None):
        """``X`` is an :class:`NWavePotential` or a callable ``(x, t) -> rho``."""
        self.config_ = NWaveConfig(self.D, self.Dhat, self.M0, self.M)
        self.potential_ = X if isinstance(X, NWavePotential) else NWavePotential(X)
        return self

    def predict(self, Z, t=0.0):
        check_is_fitted(self, "config_")
        Z = check_z_grid(Z, upper=False, below=-self.config_.M)
        res = [estimate_gw(self.config_, self.potential_, z, t, self.tol) for z in Z]
        self.error_estimates_ = np.array([r.error_estimate for r in res])
        return np.array([r.phi for r in res])


class BoundaryJetRecovery(TransformerMixin, BaseEstimator):
    """Corner jets ``d^k_t v(0,0)``, ``d^k_t v_x(0,0)`` from an initial x-jet.

    ``transform`` maps a jet of shape ``(N+1, m1, m2)`` to an array of shape
    ``(r+1, 2, m1, m2)`` holding ``b_k`` and ``b'_k``.
    """

    def __init__(self, r=4, trust_radius=None):
        self.r = r
        self.trust_radius = trust_radius

    def fit(self, X=None, y=None):
        if int(self.r) < 0:
            raise ValueError("r must be non-negative")
        self.n_jets_ = int(self.r) + 1
        return self

    def transform(self, X):
        check_is_fitted(self, "n_jets_")
        arr = check_complex_array(X, None, "X")
        self.jets_ = t_derivatives(XJet(arr), int(self.r), self.trust_radius)
        return np.stack([self.jets_.b, self.jets_.bx], axis=1)

    def boundary_values(self, ts):
        """Truncated Taylor values at the times ``ts`` (after ``transform``)."""
        check_is_fitted(self, "jets_")
        return np.array([taylor_boundary(self.jets_, t) for t in np.atleast_1d(ts)])
