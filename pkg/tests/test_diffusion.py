"""Forward-model synthesis: filters, covariances, normalization."""

import numpy as np
import pytest

from graphdeconv.diffusion import (
    diffuse_white,
    ensemble_covariance,
    normalize_observation,
    sample_correlation,
    sample_covariance,
    sample_unit_sphere_coeffs,
)
from graphdeconv.graphs import gen_er
from graphdeconv.linalg import ZeroOperatorError, mat_poly, max_abs_eigval, sym_eig


class TestUnitSphereCoeffs:
    def test_unit_norm(self):
        for seed in range(5):
            h = sample_unit_sphere_coeffs(3, np.random.default_rng(seed))
            assert abs(np.linalg.norm(h) - 1.0) < 1e-12

    def test_length(self):
        h = sample_unit_sphere_coeffs(2, np.random.default_rng(0))
        assert h.shape == (3,)

    def test_rotation_symmetry_zero_mean(self):
        """Each coordinate of a uniform sphere point has mean 0 and variance
        1/(k+1); the empirical mean over 10^4 draws stays within 3 sigma."""
        rng = np.random.default_rng(1)
        draws = np.stack([sample_unit_sphere_coeffs(2, rng) for _ in range(10_000)])
        sigma = np.sqrt(1.0 / 3.0 / 10_000)
        assert np.all(np.abs(draws.mean(axis=0)) < 3 * sigma)

    def test_order_bound(self):
        with pytest.raises(ValueError):
            sample_unit_sphere_coeffs(0, np.random.default_rng(0))


class TestDiffuseWhite:
    def test_identity_filter_passthrough(self):
        a = gen_er(6, 0.5, np.random.default_rng(2))
        rng = np.random.default_rng(3)
        x = diffuse_white(a, [1.0, 0.0, 0.0], 4, rng)
        w = np.random.default_rng(3).standard_normal((6, 4))
        np.testing.assert_allclose(x, w, atol=1e-14)

    def test_empty_graph_scales_noise(self):
        rng = np.random.default_rng(4)
        x = diffuse_white(np.zeros((5, 5)), [2.0, 1.0], 3, rng)
        w = np.random.default_rng(4).standard_normal((5, 3))
        np.testing.assert_allclose(x, 2.0 * w, atol=1e-14)

    def test_covariance_converges_to_squared_filter(self):
        """Law of large numbers: the sample covariance of many diffused
        signals approaches H(A; h)^2."""
        rng = np.random.default_rng(5)
        a = gen_er(4, 0.6, rng)
        h = np.array([0.7, 0.5, 0.2])
        x = diffuse_white(a, h, 100_000, rng)
        target = ensemble_covariance(a, h)
        rel = np.linalg.norm(sample_covariance(x) - target) / np.linalg.norm(target)
        assert rel < 0.05


class TestSampleCovariance:
    def test_constant_columns_zero(self):
        x = np.ones((3, 10))
        np.testing.assert_array_equal(sample_covariance(x), np.zeros((3, 3)))

    def test_two_point_variance_divisor(self):
        """Columns +1, -1 on one node: mean 0, covariance (1+1)/2 = 1."""
        assert sample_covariance(np.array([[1.0, -1.0]]))[0, 0] == pytest.approx(1.0)

    def test_positive_semidefinite(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            cov = sample_covariance(rng.standard_normal((6, 40)))
            assert sym_eig(cov).values.min() >= -1e-10

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            sample_covariance(np.ones((3, 1)))


class TestSampleCorrelation:
    def test_unit_diagonal_exact(self):
        corr = sample_correlation(np.random.default_rng(7).standard_normal((5, 30)))
        np.testing.assert_array_equal(np.diagonal(corr), np.ones(5))

    def test_perfectly_correlated(self):
        base = np.random.default_rng(8).standard_normal(20)
        corr = sample_correlation(np.stack([base, 2 * base]))
        assert corr[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_off_diagonals_bounded(self):
        corr = sample_correlation(np.random.default_rng(9).standard_normal((6, 25)))
        off = corr[~np.eye(6, dtype=bool)]
        assert np.all(np.abs(off) <= 1.0 + 1e-12)

    def test_zero_variance_names_node(self):
        x = np.random.default_rng(10).standard_normal((4, 12))
        x[2] = 0.0
        with pytest.raises(ValueError, match="node 2"):
            sample_correlation(x)


class TestEnsembleCovariance:
    def test_constant_filter_identity(self):
        a = gen_er(5, 0.5, np.random.default_rng(11))
        np.testing.assert_allclose(ensemble_covariance(a, [1.0, 0.0, 0.0]),
                                   np.eye(5), atol=1e-14)

    def test_single_edge_squared(self):
        """A single edge with h = [0,1,0]: A^2 = diag(1, 1)."""
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(ensemble_covariance(a, [0.0, 1.0, 0.0]),
                                   np.eye(2), atol=1e-14)

    def test_matches_polynomial_square(self):
        rng = np.random.default_rng(12)
        a = gen_er(6, 0.5, rng)
        h = rng.standard_normal(3)
        filt = mat_poly(a, h)
        np.testing.assert_allclose(ensemble_covariance(a, h), filt @ filt,
                                   atol=1e-12)


class TestNormalizeObservation:
    def test_identity_fixed_point(self):
        np.testing.assert_allclose(normalize_observation(np.eye(4)), np.eye(4),
                                   atol=1e-12)

    def test_scale_removed(self):
        np.testing.assert_allclose(normalize_observation(2.0 * np.eye(4)),
                                   np.eye(4), atol=1e-12)

    def test_unit_spectral_radius(self):
        rng = np.random.default_rng(13)
        b = rng.standard_normal((6, 6))
        psd = b @ b.T
        out = normalize_observation(psd)
        assert max_abs_eigval(out) == pytest.approx(1.0, abs=1e-8)

    def test_zero_rejected(self):
        with pytest.raises(ZeroOperatorError):
            normalize_observation(np.zeros((3, 3)))


class TestSpectralCoupling:
    def test_observation_shares_eigenvectors_with_latent(self):
        """For a noiseless polynomial observation the latent graph is
        diagonalized by the observation's eigenvectors."""
        rng = np.random.default_rng(14)
        checked = 0
        for _ in range(20):
            n = int(rng.integers(4, 13))
            a_l = gen_er(n, 0.5, rng) * rng.uniform(0.5, 1.5, size=(n, n))
            a_l = np.tril(a_l, -1)
            a_l = a_l + a_l.T
            h = sample_unit_sphere_coeffs(2, rng)
            a_o = mat_poly(a_l, h)
            values, vectors = sym_eig(a_o)
            if np.min(np.diff(values)) < 1e-6:
                continue  # derivative of eigenvectors undefined at crossings
            rotated = vectors.T @ a_l @ vectors
            off = rotated - np.diag(np.diagonal(rotated))
            assert np.max(np.abs(off)) <= 1e-6
            checked += 1
        assert checked >= 10
