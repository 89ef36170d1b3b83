"""Input validation helpers shared across the package.

All public entry points funnel array inputs through these checks so that
shape/symmetry errors surface with a clear message instead of a numpy
broadcast failure three calls deep.
"""

from __future__ import annotations

import numpy as np

SYMMETRY_TOL = 1e-12


def as_square_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a float64 square 2-D array with finite entries."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square 2-D, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValueError(f"{name} must have at least one row")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def check_symmetric(a, tol: float = SYMMETRY_TOL, name: str = "matrix") -> np.ndarray:
    """Validate symmetry to within ``tol`` (absolute, entrywise)."""
    a = as_square_matrix(a, name=name)
    dev = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if dev > tol:
        raise ValueError(f"{name} is not symmetric (max |a - a.T| = {dev:.3e} > {tol:.1e})")
    return a


def check_adjacency(a, unweighted: bool = False, name: str = "adjacency") -> np.ndarray:
    """Validate an adjacency matrix: symmetric, hollow diagonal, nonnegative."""
    a = check_symmetric(a, name=name)
    if np.any(np.diagonal(a) != 0.0):
        raise ValueError(f"{name} must have an exactly zero diagonal")
    if np.any(a < 0.0):
        raise ValueError(f"{name} must have nonnegative weights")
    if unweighted and not np.all((a == 0.0) | (a == 1.0)):
        raise ValueError(f"{name} must be binary for an unweighted ensemble")
    return a


def check_filter_coeffs(h, name: str = "coefficients") -> np.ndarray:
    """Coerce polynomial coefficients to a finite 1-D float64 vector."""
    h = np.asarray(h, dtype=np.float64).ravel()
    if h.size < 1:
        raise ValueError(f"{name} must contain at least one entry")
    if not np.all(np.isfinite(h)):
        raise ValueError(f"{name} contains non-finite entries")
    return h


def check_matrix_batch(x, name: str = "batch", symmetric: bool = False) -> np.ndarray:
    """Coerce to a (T, n, n) float64 stack of square matrices."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != x.shape[2]:
        raise ValueError(f"{name} must have shape (T, n, n), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    if symmetric:
        dev = float(np.max(np.abs(x - np.swapaxes(x, -1, -2)))) if x.size else 0.0
        if dev > SYMMETRY_TOL:
            raise ValueError(f"{name} contains a non-symmetric matrix (max dev {dev:.3e})")
    return x


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Exact projection onto symmetric matrices."""
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def hollow(a: np.ndarray) -> np.ndarray:
    """Return a copy with the diagonal (of each trailing square slice) zeroed."""
    out = np.array(a, copy=True)
    idx = np.arange(out.shape[-1])
    out[..., idx, idx] = 0.0
    return out
