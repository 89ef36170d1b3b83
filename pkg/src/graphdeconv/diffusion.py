"""Forward model: polynomial graph filters driven by white noise.

Observations are built as ``x_i = H(A_L; h) w_i`` with standard normal
``w_i``, so the signal covariance is exactly ``H(A_L; h)^2``. Estimated or
exact covariances are then rescaled by their dominant eigenvalue before any
model consumes them.
"""

from __future__ import annotations

import numpy as np

from .linalg import ZeroOperatorError, mat_poly, max_abs_eigval
from .validation import check_adjacency, check_filter_coeffs, check_symmetric, symmetrize


def sample_unit_sphere_coeffs(k: int, rng: np.random.Generator) -> np.ndarray:
    """Draw filter coefficients of length k+1 uniformly from the unit sphere."""
    if k < 1:
        raise ValueError("filter order must be >= 1")
    while True:
        h = rng.standard_normal(k + 1)
        norm = np.linalg.norm(h)
        if norm > 1e-12:
            return h / norm


def diffuse_white(a_l, h, p: int, rng: np.random.Generator) -> np.ndarray:
    """Diffuse p i.i.d. standard normal signals through the filter H(a_l; h).

    Returns the (n, p) matrix whose columns are the filtered signals.
    """
    a_l = check_adjacency(a_l, name="a_l")
    h = check_filter_coeffs(h)
    if p < 1:
        raise ValueError("need at least one signal")
    w = rng.standard_normal((a_l.shape[0], p))
    return mat_poly(a_l, h) @ w


def sample_covariance(x) -> np.ndarray:
    """Mean-removed sample covariance with divisor p (maximum-likelihood form)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"signals must be (n, p), got shape {x.shape}")
    p = x.shape[1]
    if p < 2:
        raise ValueError("sample covariance needs at least two signals")
    centered = x - x.mean(axis=1, keepdims=True)
    return symmetrize(centered @ centered.T / p)


def sample_correlation(x) -> np.ndarray:
    """Pearson correlation matrix of the signals.

    Raises on any zero-variance node, naming the offending index.
    """
    cov = sample_covariance(x)
    return correlation_from_covariance(cov)


def correlation_from_covariance(cov) -> np.ndarray:
    """Normalize a covariance matrix to unit diagonal."""
    cov = check_symmetric(cov, name="covariance")
    var = np.diagonal(cov)
    bad = np.flatnonzero(var <= 0.0)
    if bad.size:
        raise ValueError(f"node {int(bad[0])} has zero variance; correlation undefined")
    scale = 1.0 / np.sqrt(var)
    corr = symmetrize(cov * scale[:, None] * scale[None, :])
    np.fill_diagonal(corr, 1.0)
    return corr


def ensemble_covariance(a_l, h) -> np.ndarray:
    """Exact signal covariance H(a_l; h)^2 of the white-noise diffusion."""
    a_l = check_adjacency(a_l, name="a_l")
    filt = mat_poly(a_l, check_filter_coeffs(h))
    return symmetrize(filt @ filt)


def normalize_observation(a_o) -> np.ndarray:
    """Divide an observed matrix by its maximum eigenvalue magnitude."""
    a_o = check_symmetric(a_o, name="a_o")
    if not np.any(a_o):
        raise ZeroOperatorError("cannot normalize the zero matrix")
    return a_o / max_abs_eigval(a_o)
