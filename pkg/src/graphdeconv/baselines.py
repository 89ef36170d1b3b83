"""Classical graph-recovery competitors.

Four methods: hard thresholding of the observation, spectral network
deconvolution (eigenvalue map f(lam) = lam / (1 + lam), which inverts the
geometric-series mixture A_L (I - A_L)^-1), an l1-penalized Gaussian
maximum-likelihood precision estimate solved by proximal gradient with
backtracking, and a least-squares coefficient fit followed by nonconvex
proximal descent on the sparse reconstruction objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion import correlation_from_covariance
from .linalg import (
    NotPositiveDefiniteError,
    ZeroOperatorError,
    cholesky_logdet,
    soft_threshold,
    sym_eig,
)
from .validation import check_filter_coeffs, check_symmetric, hollow, symmetrize


class SingularSystemError(ValueError):
    """Normal equations are singular; a positive ridge is required."""


class DivergenceError(RuntimeError):
    """Iterates blew up; reduce the step size."""


def hard_threshold(a_o, t: float) -> np.ndarray:
    """Binary adjacency: indicator of |entry| >= t with a zeroed diagonal."""
    a_o = check_symmetric(a_o, name="a_o")
    return hollow((np.abs(a_o) >= t).astype(np.float64))


def network_deconvolution(a_o, mode: str = "pearson", eig_margin: float = 0.01,
                          rescale: bool = True) -> np.ndarray:
    """Spectral deconvolution of indirect effects.

    In ``pearson`` mode the observation is first replaced by its correlation
    matrix. With ``rescale`` the matrix is divided by
    ``(1 + eig_margin) * max(lam_max, |lam_min|)`` so every eigenvalue lands
    strictly inside (-1, 1); then f(lam) = lam / (1 + lam) is applied per
    eigenvalue and the matrix is rebuilt in the same eigenbasis.
    """
    a_o = check_symmetric(a_o, name="a_o")
    if mode not in ("pearson", "raw"):
        raise ValueError("mode must be 'pearson' or 'raw'")
    if not np.any(a_o):
        raise ZeroOperatorError("cannot deconvolve the zero matrix")
    work = correlation_from_covariance(a_o) if mode == "pearson" else a_o
    values, vectors = sym_eig(work)
    if rescale:
        spread = max(values[-1], abs(values[0]))
        if spread <= 0.0:
            raise ZeroOperatorError("spectrum collapsed; nothing to deconvolve")
        values = values / ((1.0 + eig_margin) * spread)
    if np.any(values <= -1.0):
        raise ValueError("an eigenvalue at or below -1 makes f(lam) singular; rescale")
    mapped = values / (1.0 + values)
    return symmetrize((vectors * mapped[None, :]) @ vectors.T)


@dataclass
class GlassoResult:
    theta: np.ndarray
    converged: bool
    objective: list[float]
    n_iter: int


def _glasso_objective(theta, s, alpha):
    _, logdet = cholesky_logdet(theta)
    penalty = float(np.sum(np.abs(hollow(theta))))
    return logdet - float(np.sum(s * theta)) - alpha * penalty


def glasso(s, alpha: float, tol: float = 1e-6, max_iter: int = 500,
           step0: float = 1.0) -> GlassoResult:
    """Proximal-gradient maximization of
    ``log det T - trace(S T) - alpha * sum_offdiag |T|``.

    Gradient steps on the smooth part use ``S - inv(T)``; the prox
    soft-thresholds off-diagonal entries by ``step * alpha``. Backtracking
    halves the step whenever the candidate loses positive definiteness or
    the objective would decrease, so accepted objectives are monotone
    non-decreasing. Stops on relative objective change below ``tol``.
    """
    s = check_symmetric(s, name="s")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    n = s.shape[0]
    theta = np.diag(1.0 / (np.diagonal(s) + alpha + 1e-12))
    obj = _glasso_objective(theta, s, alpha)
    trace = [obj]
    step = step0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = s - np.linalg.inv(theta)
        accepted = None
        while step >= 1e-14:
            cand = theta - step * grad
            off = hollow(soft_threshold(cand, step * alpha))
            cand = off + np.diag(np.diagonal(cand))
            cand = symmetrize(cand)
            try:
                cand_obj = _glasso_objective(cand, s, alpha)
            except NotPositiveDefiniteError:
                step *= 0.5
                continue
            if cand_obj < obj:
                step *= 0.5
                continue
            accepted = (cand, cand_obj)
            break
        if accepted is None:
            converged = True
            break
        theta, new_obj = accepted
        rel = abs(new_obj - obj) / (abs(obj) + 1.0)
        obj = new_obj
        trace.append(obj)
        step = min(step * 2.0, step0)
        if rel < tol:
            converged = True
            break
    return GlassoResult(theta=theta, converged=converged, objective=trace, n_iter=it)


def _matrix_powers(a: np.ndarray, top: int) -> list[np.ndarray]:
    n = a.shape[-1]
    eye = np.eye(n)
    if a.ndim > 2:
        eye = np.broadcast_to(eye, a.shape)
    powers = [eye]
    for _ in range(top):
        powers.append(powers[-1] @ a)
    return powers


def grad_g_full(a, a_o, h) -> np.ndarray:
    """Exact gradient of g(A) = 0.5 ||A_O - H(A; h)||_F^2 for symmetric A.

    Composed of the data term ``-sum_k h_k sum_r A^(k-r-1) A_O A^r`` and the
    trace term ``0.5 sum_{k,l} h_k h_l (k+l) A^(k+l-1)``. Accepts a single
    matrix or a stacked batch.
    """
    a = np.asarray(a, dtype=np.float64)
    a_o = np.asarray(a_o, dtype=np.float64)
    h = check_filter_coeffs(h)
    k_top = h.size - 1
    if k_top == 0:
        return np.zeros_like(a)
    powers = _matrix_powers(a, max(k_top - 1, 2 * k_top - 1))
    if a_o.ndim == 2 and a.ndim > 2:
        a_o = np.broadcast_to(a_o, a.shape)
    grad = np.zeros_like(a)
    for k in range(1, k_top + 1):
        if h[k] == 0.0:
            continue
        inner = np.zeros_like(a)
        for r in range(k):
            inner = inner + powers[k - r - 1] @ a_o @ powers[r]
        grad = grad - h[k] * inner
    for k in range(k_top + 1):
        for l in range(k_top + 1):
            deg = k + l
            if deg == 0 or h[k] == 0.0 or h[l] == 0.0:
                continue
            grad = grad + 0.5 * h[k] * h[l] * deg * powers[deg - 1]
    return symmetrize(grad)


def grad_g_linear(a, a_o, h) -> np.ndarray:
    """First-order truncation of grad_g_full for a quadratic filter:
    ``-h1 A_O - h2 (A_O A + A A_O) + (2 h0 h2 + h1^2) A``."""
    h = check_filter_coeffs(h)
    if h.size != 3:
        raise ValueError("linearized gradient is defined for length-3 coefficients")
    a = np.asarray(a, dtype=np.float64)
    a_o = np.asarray(a_o, dtype=np.float64)
    return (-h[1] * a_o - h[2] * (a_o @ a + a @ a_o)
            + (2.0 * h[0] * h[2] + h[1] ** 2) * a)


def lsopt_fit_coeffs(pairs, k: int, ridge: float = 0.0) -> np.ndarray:
    """Least-squares polynomial coefficients from (A_O, A_L) pairs.

    Stacks vectorized latent-graph powers as regressors for vec(A_O) and
    solves the ridge-regularized normal equations. Collinear powers with
    ridge = 0 raise ``SingularSystemError``.
    """
    if not pairs:
        raise ValueError("need at least one (a_o, a_l) pair")
    if k < 0:
        raise ValueError("polynomial order must be nonnegative")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    gram = np.zeros((k + 1, k + 1))
    rhs = np.zeros(k + 1)
    for a_o, a_l in pairs:
        a_o = check_symmetric(a_o, name="a_o")
        a_l = check_symmetric(a_l, name="a_l")
        powers = _matrix_powers(a_l, k)
        for i in range(k + 1):
            rhs[i] += float(np.sum(powers[i] * a_o))
            for j in range(i, k + 1):
                val = float(np.sum(powers[i] * powers[j]))
                gram[i, j] += val
                if j != i:
                    gram[j, i] += val
    system = gram + ridge * np.eye(k + 1)
    try:
        factor, _ = cholesky_logdet(system)
    except NotPositiveDefiniteError as exc:
        raise SingularSystemError(
            "normal equations are singular (collinear matrix powers); "
            "set ridge > 0"
        ) from exc
    y = np.linalg.solve(factor, rhs)
    return np.linalg.solve(factor.T, y)


@dataclass
class LsoptResult:
    adjacency: np.ndarray
    objective: list[float]


def _lsopt_objective(a, a_o, h, lam):
    from .linalg import mat_poly

    resid = a_o - mat_poly(a, h)
    axes = tuple(range(a.ndim - 2, a.ndim))
    g = 0.5 * np.sum(resid * resid, axis=axes)
    l1 = np.sum(np.abs(a), axis=axes)
    return lam * l1 + g


def lsopt_iterate(a_o: np.ndarray, h, lam: float, step: float, iters: int,
                  prior: np.ndarray | None = None) -> tuple[np.ndarray, list]:
    """Proximal-gradient iterations on a (possibly batched) observation:
    ``A <- ReLU(A - step * grad_g(A) - step * lam)`` with the diagonal
    re-zeroed every iteration. Returns the final iterate and the objective
    trajectory (per-iterate array for batches)."""
    if step <= 0:
        raise ValueError("step must be positive")
    a_o = np.asarray(a_o, dtype=np.float64)
    a = np.zeros_like(a_o) if prior is None else np.array(
        np.broadcast_to(prior, a_o.shape), dtype=np.float64)
    a = hollow(symmetrize(a))
    trajectory = [_lsopt_objective(a, a_o, h, lam)]
    for _ in range(iters):
        grad = symmetrize(grad_g_full(a, a_o, h))
        a = np.maximum(a - step * grad - step * lam, 0.0)
        a = hollow(a)
        obj = _lsopt_objective(a, a_o, h, lam)
        if not np.all(np.isfinite(obj)) or np.any(obj > 1e12):
            raise DivergenceError(
                f"objective exceeded 1e12 (step {step}, lam {lam}); reduce the step"
            )
        trajectory.append(obj)
    return a, trajectory


def lsopt_solve(a_o, h, lam: float, step: float, iters: int,
                prior: np.ndarray | None = None) -> LsoptResult:
    """Single-observation proximal descent on the sparse reconstruction
    objective ``lam * ||A||_1 + 0.5 ||A_O - H(A; h)||_F^2``."""
    a_o = check_symmetric(a_o, name="a_o")
    h = check_filter_coeffs(h)
    a, trajectory = lsopt_iterate(a_o, h, lam, step, iters, prior=prior)
    return LsoptResult(adjacency=a, objective=[float(o) for o in trajectory])


def lsopt_solve_adam(a_o, h, lam: float, lr: float, iters: int,
                     prior: np.ndarray | None = None,
                     beta1: float = 0.85, beta2: float = 0.99) -> LsoptResult:
    """Adam-driven variant of ``lsopt_solve``: an adaptive gradient step on
    the smooth part followed by the same shrinkage and projection."""
    a_o = check_symmetric(a_o, name="a_o")
    h = check_filter_coeffs(h)
    a = np.zeros_like(a_o) if prior is None else hollow(symmetrize(np.asarray(prior, dtype=np.float64)))
    m = np.zeros_like(a)
    v = np.zeros_like(a)
    trajectory = [float(_lsopt_objective(a, a_o, h, lam))]
    for t in range(1, iters + 1):
        grad = symmetrize(grad_g_full(a, a_o, h))
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad * grad
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        a = a - lr * m_hat / (np.sqrt(v_hat) + 1e-8)
        a = hollow(np.maximum(a - lr * lam, 0.0))
        obj = float(_lsopt_objective(a, a_o, h, lam))
        if not np.isfinite(obj) or obj > 1e12:
            raise DivergenceError(f"objective exceeded 1e12 (lr {lr}, lam {lam})")
        trajectory.append(obj)
    return LsoptResult(adjacency=a, objective=trajectory)
