"""Classical baselines against analytic and finite-difference oracles."""

import numpy as np
import pytest

from graphdeconv.baselines import (
    DivergenceError,
    GlassoResult,
    SingularSystemError,
    glasso,
    grad_g_full,
    grad_g_linear,
    hard_threshold,
    lsopt_fit_coeffs,
    lsopt_solve,
    network_deconvolution,
)
from graphdeconv.graphs import gen_er
from graphdeconv.linalg import mat_poly, sym_eig


def hollow_symmetric(n, rng, nonneg=True):
    a = rng.random((n, n)) if nonneg else rng.standard_normal((n, n))
    a = 0.5 * (a + a.T)
    np.fill_diagonal(a, 0.0)
    return a


class TestHardThreshold:
    def test_zero_cutoff_complete(self):
        rng = np.random.default_rng(0)
        a = hollow_symmetric(6, rng) + 0.01
        np.fill_diagonal(a, 0.0)
        out = hard_threshold(a, 0.0)
        assert np.all(out[~np.eye(6, dtype=bool)] == 1.0)

    def test_cutoff_above_max_empty(self):
        rng = np.random.default_rng(1)
        a = hollow_symmetric(6, rng)
        assert hard_threshold(a, a.max() + 1.0).sum() == 0

    def test_diagonal_always_zero(self):
        out = hard_threshold(3.0 * np.eye(4), 0.5)
        assert out.sum() == 0

    def test_monotone_in_cutoff(self):
        rng = np.random.default_rng(2)
        a = hollow_symmetric(8, rng, nonneg=False)
        cuts = np.sort(rng.random(5))
        prev = hard_threshold(a, cuts[0])
        for t in cuts[1:]:
            cur = hard_threshold(a, t)
            assert np.all(cur <= prev)  # edge sets shrink as t grows
            prev = cur


class TestNetworkDeconvolution:
    def test_eigenvalue_map_on_diagonal(self):
        """f(0.5) = 1/3 and f(0.2) = 1/6, directly on a diagonal spectrum."""
        out = network_deconvolution(np.diag([0.5, 0.2]), mode="raw", rescale=False)
        np.testing.assert_allclose(out, np.diag([1.0 / 3.0, 1.0 / 6.0]), atol=1e-12)

    def test_zero_eigenvalue_untouched(self):
        out = network_deconvolution(np.diag([0.5, 0.0]), mode="raw", rescale=False)
        assert out[1, 1] == pytest.approx(0.0, abs=1e-12)

    def test_geometric_series_inversion(self):
        """A_O = A_L (I - A_L)^-1 sums every walk of length >= 1; mapping
        each eigenvalue through lam / (1 + lam) undoes it exactly."""
        rng = np.random.default_rng(3)
        n = 15
        a_l = hollow_symmetric(n, rng) * (hollow_symmetric(n, rng) > 0.6)
        a_l *= 0.5 / max(abs(sym_eig(a_l).values[0]), sym_eig(a_l).values[-1])
        a_o = a_l @ np.linalg.inv(np.eye(n) - a_l)
        a_o = 0.5 * (a_o + a_o.T)
        recovered = network_deconvolution(a_o, mode="raw", rescale=False)
        assert np.max(np.abs(recovered - a_l)) <= 1e-6

    def test_shares_eigenbasis_with_input(self):
        rng = np.random.default_rng(4)
        b = rng.standard_normal((7, 7))
        a_o = b @ b.T / 7
        out = network_deconvolution(a_o, mode="pearson")
        from graphdeconv.diffusion import correlation_from_covariance
        from graphdeconv.linalg import max_abs_eigval

        scaled = correlation_from_covariance(a_o)
        scaled = scaled / (1.01 * max_abs_eigval(scaled))
        vectors = sym_eig(scaled).vectors
        rotated = vectors.T @ out @ vectors
        off = rotated - np.diag(np.diagonal(rotated))
        assert np.max(np.abs(off)) <= 1e-8

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError):
            network_deconvolution(np.zeros((4, 4)))


class TestGlasso:
    def test_identity_input_stays_diagonal(self):
        res = glasso(np.eye(5), alpha=0.1)
        off = res.theta[~np.eye(5, dtype=bool)]
        np.testing.assert_array_equal(off, np.zeros_like(off))

    def test_unpenalized_two_by_two_inverts(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
            s = q @ np.diag(rng.uniform(0.5, 2.0, 2)) @ q.T
            s = 0.5 * (s + s.T)
            res = glasso(s, alpha=0.0, tol=1e-13, max_iter=5000)
            np.testing.assert_allclose(res.theta, np.linalg.inv(s), atol=1e-6)

    def test_objective_monotone(self):
        rng = np.random.default_rng(6)
        b = rng.standard_normal((6, 30))
        s = b @ b.T / 30
        res = glasso(s / np.max(np.abs(s)), alpha=0.05)
        diffs = np.diff(res.objective)
        assert np.all(diffs >= -1e-12)

    def test_large_alpha_kills_offdiagonals(self):
        rng = np.random.default_rng(7)
        b = rng.standard_normal((5, 40))
        s = b @ b.T / 40
        alpha = float(np.max(np.abs(s - np.diag(np.diagonal(s))))) + 0.1
        res = glasso(s, alpha=alpha)
        off = res.theta[~np.eye(5, dtype=bool)]
        np.testing.assert_array_equal(off, np.zeros_like(off))

    def test_result_symmetric_and_flagged(self):
        rng = np.random.default_rng(8)
        b = rng.standard_normal((4, 30))
        s = b @ b.T / 30
        res = glasso(s, alpha=0.05, max_iter=2)
        assert isinstance(res, GlassoResult)
        np.testing.assert_allclose(res.theta, res.theta.T, atol=1e-14)


class TestGradients:
    def test_zero_at_noiseless_optimum(self):
        rng = np.random.default_rng(9)
        a_l = gen_er(6, 0.5, rng)
        h = np.array([0.4, 0.8, 0.3])
        a_o = mat_poly(a_l, h)
        grad = grad_g_full(a_l, a_o, h)
        assert np.max(np.abs(grad)) <= 1e-10

    def test_closed_form_at_zero(self):
        """At A = 0 only -h1 A_O and the h0 h1 identity term survive."""
        rng = np.random.default_rng(10)
        a_o = hollow_symmetric(5, rng)
        h = np.array([0.7, -0.4, 0.9])
        expect = -h[1] * a_o + h[0] * h[1] * np.eye(5)
        np.testing.assert_allclose(grad_g_full(np.zeros((5, 5)), a_o, h),
                                   expect, atol=1e-14)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        n = 6
        a = hollow_symmetric(n, rng, nonneg=False)
        a_o = hollow_symmetric(n, rng, nonneg=False)
        h = rng.standard_normal(3)

        def g(mat):
            resid = a_o - mat_poly(mat, h)
            return 0.5 * float(np.sum(resid * resid))

        grad = grad_g_full(a, a_o, h)
        eps = 1e-6
        for i in range(n):
            for j in range(i, n):
                delta = np.zeros((n, n))
                delta[i, j] = eps
                delta[j, i] = eps
                fd = (g(a + delta) - g(a - delta)) / (2 * eps)
                expected = grad[i, j] + (grad[j, i] if j != i else 0.0)
                assert fd == pytest.approx(expected, rel=1e-6, abs=1e-8)

    def test_linear_at_zero(self):
        rng = np.random.default_rng(12)
        a_o = hollow_symmetric(5, rng)
        h = np.array([0.2, 0.9, -0.5])
        np.testing.assert_allclose(grad_g_linear(np.zeros((5, 5)), a_o, h),
                                   -h[1] * a_o, atol=1e-14)

    def test_linear_term_coefficient(self):
        """The coefficient multiplying A is 2 h0 h2 + h1^2: isolate it by
        evaluating with A_O = 0."""
        rng = np.random.default_rng(13)
        a = hollow_symmetric(5, rng)
        h = np.array([0.3, 0.7, 0.2])
        out = grad_g_linear(a, np.zeros((5, 5)), h)
        np.testing.assert_allclose(out, (2 * h[0] * h[2] + h[1] ** 2) * a,
                                   atol=1e-14)

    def test_truncation_residual_quadratic(self):
        """Off the diagonal the difference full - linear starts at second
        order, so halving ||A|| divides the residual by about four."""
        rng = np.random.default_rng(14)
        a = 0.05 * hollow_symmetric(6, rng, nonneg=False)
        a_o = hollow_symmetric(6, rng, nonneg=False)
        h = rng.standard_normal(3)
        mask = ~np.eye(6, dtype=bool)

        def residual(mat):
            diff = grad_g_full(mat, a_o, h) - grad_g_linear(mat, a_o, h)
            return np.linalg.norm(diff * mask)

        ratio = residual(a) / residual(0.5 * a)
        assert 3.7 <= ratio <= 4.3


class TestLsoptFit:
    def test_recovers_known_coefficients(self):
        rng = np.random.default_rng(15)
        h = np.array([0.5, 1.2, -0.7])
        pairs = []
        for _ in range(4):
            a_l = gen_er(7, 0.5, rng)
            pairs.append((mat_poly(a_l, h), a_l))
        got = lsopt_fit_coeffs(pairs, k=2, ridge=1e-8)
        np.testing.assert_allclose(got, h, atol=1e-6)

    def test_zero_latent_only_constant_identifiable(self):
        a_o = 0.8 * np.eye(5)
        got = lsopt_fit_coeffs([(a_o, np.zeros((5, 5)))], k=2, ridge=1e-6)
        assert got[0] == pytest.approx(0.8, abs=1e-5)
        assert got[1] == 0.0 and got[2] == 0.0

    def test_pure_scaling_pair(self):
        """A_O = 2 A_L with K = 1: the hollow latent graph is trace-free so
        the constant drops out and the slope is exactly two."""
        rng = np.random.default_rng(16)
        a_l = gen_er(6, 0.5, rng)
        got = lsopt_fit_coeffs([(2.0 * a_l, a_l)], k=1, ridge=1e-8)
        np.testing.assert_allclose(got, [0.0, 2.0], atol=1e-6)

    def test_singular_without_ridge(self):
        with pytest.raises(SingularSystemError, match="ridge"):
            lsopt_fit_coeffs([(np.eye(4), np.zeros((4, 4)))], k=2, ridge=0.0)


class TestLsoptSolve:
    def test_noiseless_fixed_point(self):
        rng = np.random.default_rng(17)
        a_l = gen_er(6, 0.5, rng)
        h = np.array([0.4, 0.8, 0.3])
        a_o = mat_poly(a_l, h)
        res = lsopt_solve(a_o, h, lam=0.0, step=0.01, iters=50, prior=a_l)
        np.testing.assert_allclose(res.adjacency, a_l, atol=1e-10)

    def test_huge_penalty_zeroes(self):
        rng = np.random.default_rng(18)
        a_o = hollow_symmetric(6, rng)
        res = lsopt_solve(a_o, [0.1, 0.5, 0.1], lam=1e6, step=1e-3, iters=100)
        np.testing.assert_array_equal(res.adjacency, np.zeros((6, 6)))

    def test_divergence_guard(self):
        rng = np.random.default_rng(19)
        a_o = 5.0 * hollow_symmetric(8, rng)
        with pytest.raises(DivergenceError):
            lsopt_solve(a_o, [0.1, 2.0, 3.0], lam=0.0, step=50.0, iters=500)

    def test_objective_reported(self):
        rng = np.random.default_rng(20)
        a_l = gen_er(5, 0.5, rng)
        h = np.array([0.3, 0.8, 0.2])
        res = lsopt_solve(mat_poly(a_l, h), h, lam=0.01, step=0.01, iters=30)
        assert len(res.objective) == 31
        assert all(np.isfinite(v) for v in res.objective)
