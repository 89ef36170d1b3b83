"""Graph generators: exact structure checks plus Monte-Carlo density oracles."""

import numpy as np
import pytest

from graphdeconv.graphs import (
    EnsembleSpec,
    SamplingError,
    block_membership,
    default_ensemble,
    edge_density,
    gen_ba,
    gen_er,
    gen_rg,
    gen_sbm,
    is_connected,
    sample_constrained,
)
from graphdeconv.validation import check_adjacency


def assert_valid_unweighted(a):
    check_adjacency(a, unweighted=True)


class TestErdosRenyi:
    def test_p_zero_empty(self):
        a = gen_er(10, 0.0, np.random.default_rng(0))
        assert a.sum() == 0

    def test_p_one_complete(self):
        a = gen_er(10, 1.0, np.random.default_rng(0))
        assert edge_density(a) == 1.0

    def test_mean_density_matches_p(self):
        """Per-pair edges are Bernoulli(p); the empirical mean density over
        200 draws must sit within +-0.02 of p = 0.56 at n = 68."""
        rng = np.random.default_rng(1)
        dens = [edge_density(gen_er(68, 0.56, rng)) for _ in range(200)]
        assert abs(np.mean(dens) - 0.56) < 0.02

    def test_output_valid(self):
        assert_valid_unweighted(gen_er(15, 0.3, np.random.default_rng(2)))


class TestRandomGeometric:
    def test_radius_covers_cube_complete(self):
        a = gen_rg(12, 2, np.sqrt(2.0), np.random.default_rng(3))
        assert edge_density(a) == 1.0

    def test_radius_zero_empty(self):
        a = gen_rg(12, 2, 0.0, np.random.default_rng(4))
        assert a.sum() == 0

    def test_mean_density_near_half(self):
        rng = np.random.default_rng(5)
        dens = [edge_density(gen_rg(68, 2, 0.56, rng)) for _ in range(200)]
        assert 0.45 <= np.mean(dens) <= 0.65

    def test_output_valid(self):
        assert_valid_unweighted(gen_rg(15, 2, 0.4, np.random.default_rng(6)))


class TestBarabasiAlbert:
    def test_seed_plus_one_is_complete(self):
        a = gen_ba(6, 5, np.random.default_rng(7))
        assert edge_density(a) == 1.0

    def test_exact_edge_count(self):
        """m-node seed clique has m(m-1)/2 edges and each of the n-m
        arrivals adds exactly m more."""
        rng = np.random.default_rng(8)
        for n, m in ((10, 3), (30, 5), (68, 15)):
            a = gen_ba(n, m, rng)
            edges = int(np.count_nonzero(np.triu(a, k=1)))
            assert edges == m * (m - 1) // 2 + (n - m) * m

    def test_reference_density_band(self):
        """n = 68, m = 15 lands in the accepted [0.3, 0.4] band."""
        a = gen_ba(68, 15, np.random.default_rng(9))
        assert 0.3 <= edge_density(a) <= 0.4

    def test_output_valid(self):
        assert_valid_unweighted(gen_ba(25, 4, np.random.default_rng(10)))

    def test_m_bounds(self):
        with pytest.raises(ValueError):
            gen_ba(5, 5, np.random.default_rng(0))


class TestStochasticBlockModel:
    def test_equal_probs_match_er_density(self):
        """With p_in = p_out = p the draw is distributionally Erdos-Renyi."""
        rng = np.random.default_rng(11)
        dens = [edge_density(gen_sbm(30, 3, 0.35, 0.35, rng)) for _ in range(200)]
        assert abs(np.mean(dens) - 0.35) < 0.02

    def test_disjoint_cliques(self):
        a = gen_sbm(12, 3, 1.0, 0.0, np.random.default_rng(12))
        member = block_membership(12, 3)
        same = member[:, None] == member[None, :]
        expect = same.astype(float) - np.eye(12)
        np.testing.assert_array_equal(a, expect)

    def test_within_block_density(self):
        rng = np.random.default_rng(13)
        member = block_membership(21, 3)
        same = (member[:, None] == member[None, :]) & ~np.eye(21, dtype=bool)
        within = [gen_sbm(21, 3, 0.6, 0.1, rng)[same].mean() for _ in range(200)]
        assert abs(np.mean(within) - 0.6) < 0.02

    def test_blocks_must_divide(self):
        with pytest.raises(ValueError, match="divide"):
            gen_sbm(10, 3, 0.5, 0.1, np.random.default_rng(0))


class TestEdgeDensity:
    def test_empty(self):
        assert edge_density(np.zeros((5, 5))) == 0.0

    def test_complete(self):
        assert edge_density(np.ones((5, 5)) - np.eye(5)) == 1.0

    def test_path_graph(self):
        a = np.zeros((4, 4))
        for i in range(3):
            a[i, i + 1] = a[i + 1, i] = 1.0
        assert edge_density(a) == 0.5

    def test_too_small(self):
        with pytest.raises(ValueError):
            edge_density(np.zeros((1, 1)))


class TestConnectivity:
    def test_path_connected(self):
        a = np.zeros((4, 4))
        for i in range(3):
            a[i, i + 1] = a[i + 1, i] = 1.0
        assert is_connected(a)

    def test_isolated_node(self):
        a = np.zeros((3, 3))
        a[0, 1] = a[1, 0] = 1.0
        assert not is_connected(a)


class TestSampleConstrained:
    def test_unconstrained_returns_first_draw(self):
        spec = EnsembleSpec(kind="ER", n=12, params={"p": 0.4},
                            density_range=(0.0, 1.0), require_connected=False)
        seed = np.random.default_rng(14)
        direct = gen_er(12, 0.4, np.random.default_rng(14))
        np.testing.assert_array_equal(sample_constrained(spec, seed), direct)

    def test_density_acceptance(self):
        spec = EnsembleSpec(kind="ER", n=20, params={"p": 0.56},
                            density_range=(0.5, 0.6))
        a = sample_constrained(spec, np.random.default_rng(15))
        assert 0.5 <= edge_density(a) <= 0.6
        assert is_connected(a)

    def test_impossible_range_errors(self):
        spec = EnsembleSpec(kind="ER", n=20, params={"p": 0.1},
                            density_range=(0.99, 1.0), max_tries=50)
        with pytest.raises(SamplingError, match="acceptance rate"):
            sample_constrained(spec, np.random.default_rng(16))

    def test_deterministic_under_seed(self):
        spec = default_ensemble("RG", 20)
        a1 = sample_constrained(spec, np.random.default_rng(17))
        a2 = sample_constrained(spec, np.random.default_rng(17))
        np.testing.assert_array_equal(a1, a2)


class TestDefaults:
    def test_reference_parameters(self):
        er = default_ensemble("ER", 68)
        assert er.params["p"] == 0.56 and er.density_range == (0.5, 0.6)
        rg = default_ensemble("RG", 68)
        assert rg.params == {"d": 2, "r": 0.56}
        ba = default_ensemble("BA", 68)
        assert ba.params["m"] == 15 and ba.density_range == (0.3, 0.4)
        sbm = default_ensemble("SBM", 21)
        assert sbm.params == {"blocks": 3, "p_in": 0.6, "p_out": 0.1}

    def test_spec_roundtrip(self):
        spec = default_ensemble("RG", 20)
        assert EnsembleSpec.from_dict(spec.to_dict()) == spec
