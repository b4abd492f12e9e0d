"""Input checks for the estimator API.

``sklearn.utils.check_array`` rejects complex input, so the complex-aware
versions live here.
"""
import numpy as np

from .exceptions import DimensionMismatch


def check_complex_array(X, ndim=None, name="X", min_samples=1):
    """Finite complex ndarray with an optional fixed number of dimensions."""
    try:
        arr = np.asarray(X, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} is not convertible to a complex array") from exc
    if ndim is not None and arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if arr.ndim and arr.shape[0] < min_samples:
        raise ValueError(f"{name} needs at least {min_samples} sample(s)")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_z_grid(Z, upper=True, below=None, name="Z"):
    """1-D array of spectral parameters.

    ``upper`` requires ``Im z > 0``; otherwise ``Im z < below`` is required.
    Pairs ``[re, im]`` (shape ``(n, 2)`` real) are accepted as well.
    """
    arr = np.asarray(Z)
    if arr.ndim == 2 and arr.shape[1] == 2 and not np.iscomplexobj(arr):
        arr = arr[:, 0] + 1j * arr[:, 1]
    arr = check_complex_array(np.atleast_1d(arr), 1, name)
    if upper and np.any(arr.imag <= 0):
        raise ValueError(f"{name} must lie in the upper half-plane")
    if not upper and below is not None and np.any(arr.imag >= below):
        raise ValueError(f"{name} must satisfy Im z < {below:g}")
    return arr
