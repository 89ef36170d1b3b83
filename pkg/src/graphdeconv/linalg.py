"""Dense symmetric linear-algebra primitives.

Everything operates on plain float64 numpy arrays. Inputs are validated
(symmetry to 1e-12, finiteness) and outputs are exactly symmetrized where
the operation preserves symmetry only up to rounding.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .validation import check_filter_coeffs, check_symmetric, symmetrize

_POWER_START_SEED = 0x5EED1E55


class EigenConvergenceError(RuntimeError):
    """Eigensolver failed to converge; carries the off-diagonal residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (off-diagonal residual {residual:.3e})")
        self.residual = residual


class ZeroOperatorError(ValueError):
    """Raised when an operation is undefined on the zero matrix."""


class NotPositiveDefiniteError(ValueError):
    """Raised when a Cholesky factorization fails."""


class EigenPair(NamedTuple):
    values: np.ndarray   # eigenvalues, ascending, shape (n,)
    vectors: np.ndarray  # orthogonal matrix, columns are eigenvectors, shape (n, n)


def sym_eig(a, tol: float = 1e-12, max_sweeps: int = 100) -> EigenPair:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    a : (n, n) array
        Symmetric matrix.
    tol : float
        Relative off-diagonal target: sweeps stop once the off-diagonal
        Frobenius norm drops below ``tol`` times the matrix norm.
    max_sweeps : int
        Cap on full cyclic sweeps before giving up.

    Returns
    -------
    EigenPair
        Eigenvalues sorted ascending and the matching orthogonal
        eigenvector matrix, so that ``V @ diag(w) @ V.T == a``.
    """
    a = check_symmetric(a, name="a")
    n = a.shape[0]
    work = a.copy()
    vecs = np.eye(n)
    if n == 1:
        return EigenPair(values=np.diagonal(work).copy(), vectors=vecs)

    norm = float(np.linalg.norm(work))
    if norm == 0.0:
        return EigenPair(values=np.zeros(n), vectors=vecs)
    target = tol * norm

    def off_norm(m):
        off = m - np.diag(np.diagonal(m))
        return float(np.linalg.norm(off))

    residual = off_norm(work)
    for _ in range(max_sweeps):
        if residual <= target:
            break
        # Rotating entries far below the sweep target wastes work.
        skip = residual / (n * n)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (work[q, q] - work[p, p]) / (2.0 * apq)
                t = np.sign(theta) if theta != 0 else 1.0
                t /= abs(theta) + np.hypot(theta, 1.0)
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                row_p = work[p, :].copy()
                row_q = work[q, :].copy()
                work[p, :] = c * row_p - s * row_q
                work[q, :] = s * row_p + c * row_q
                col_p = work[:, p].copy()
                col_q = work[:, q].copy()
                work[:, p] = c * col_p - s * col_q
                work[:, q] = s * col_p + c * col_q
                # Closed forms keep the pivot pair exact.
                work[p, p] = row_p[p] - t * apq
                work[q, q] = row_q[q] + t * apq
                work[p, q] = 0.0
                work[q, p] = 0.0
                vp = vecs[:, p].copy()
                vq = vecs[:, q].copy()
                vecs[:, p] = c * vp - s * vq
                vecs[:, q] = s * vp + c * vq
        residual = off_norm(work)
    else:
        if residual > target:
            raise EigenConvergenceError(
                f"Jacobi sweeps did not converge in {max_sweeps} sweeps", residual
            )

    values = np.diagonal(work).copy()
    order = np.argsort(values, kind="stable")
    return EigenPair(values=values[order], vectors=vecs[:, order])


def max_abs_eigval(a, tol: float = 1e-12, max_iter: int = 20000) -> float:
    """Largest eigenvalue magnitude of a symmetric matrix via power iteration.

    Deflation-free: the iteration tracks the norm growth ratio, which
    converges to max |lambda| even when +r and -r are both in the spectrum.
    """
    a = check_symmetric(a, name="a")
    scale = float(np.max(np.abs(a)))
    if scale == 0.0:
        raise ZeroOperatorError("zero operator has no dominant eigenvalue")
    rng = np.random.default_rng(_POWER_START_SEED)
    x = rng.standard_normal(a.shape[0])
    x /= np.linalg.norm(x)
    prev = None
    for _ in range(max_iter):
        y = a @ x
        est = float(np.linalg.norm(y))
        if est <= 1e-300 * scale:
            # Start vector fell into the null space; re-randomize.
            x = rng.standard_normal(a.shape[0])
            x /= np.linalg.norm(x)
            prev = None
            continue
        x = y / est
        if prev is not None and abs(est - prev) <= tol * max(1.0, est):
            return est
        prev = est
    raise EigenConvergenceError(
        f"power iteration did not converge in {max_iter} iterations",
        abs(est - prev) if prev is not None else float("inf"),
    )


def mat_poly(a, h) -> np.ndarray:
    """Evaluate the matrix polynomial ``sum_k h[k] * a**k`` by Horner's rule.

    Works on a single (n, n) matrix or a stacked (..., n, n) batch.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 2:
        a = check_symmetric(a, name="a")
    h = check_filter_coeffs(h, name="h")
    n = a.shape[-1]
    eye = np.eye(n)
    out = np.broadcast_to(h[-1] * eye, a.shape).copy() if a.ndim > 2 else h[-1] * eye
    for coeff in h[-2::-1]:
        out = a @ out + coeff * eye
    return symmetrize(out)


def cholesky_logdet(a) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor and log-determinant of a symmetric PD matrix.

    Raises
    ------
    NotPositiveDefiniteError
        If the factorization fails; callers that backtrack (e.g. the
        graphical-lasso solver) catch this.
    """
    a = check_symmetric(a, name="a")
    try:
        factor = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc
    logdet = 2.0 * float(np.sum(np.log(np.diagonal(factor))))
    return factor, logdet


def soft_threshold(x, t: float) -> np.ndarray:
    """Entrywise shrinkage: sign(x) * max(|x| - t, 0)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
