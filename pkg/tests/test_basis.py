import numpy as np
import pytest

from effham.basis import (Basis, build_regular_basis, build_stochastic_basis,
                          estimate_density, free_endpoint_density, load_basis,
                          save_basis)
from effham.errors import ConfigurationError, SamplingError
from effham.freekernel import FreeKernelParams
from effham.sampler import RngStream


class TestRegularBasis:
    def test_two_nodes(self):
        b = build_regular_basis(2, -1.0, 1.0)
        assert b.positions[:, 0].tolist() == [-0.5, 0.5]
        assert b.weights.tolist() == [1.0, 1.0]
        assert b.flavor == "regular" and b.dimension == 1

    def test_four_nodes(self):
        b = build_regular_basis(4, 0.0, 4.0)
        assert b.positions[:, 0].tolist() == [0.5, 1.5, 2.5, 3.5]
        assert np.all(b.weights == 1.0)

    @pytest.mark.parametrize("n", [2, 7, 40])
    def test_weights_partition_domain(self, n):
        b = build_regular_basis(n, -3.0, 5.0)
        assert b.weights.sum() == pytest.approx(8.0, rel=1e-12)
        assert np.allclose(np.diff(b.positions[:, 0]), 8.0 / n)

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            build_regular_basis(1, -1.0, 1.0)
        with pytest.raises(ConfigurationError):
            build_regular_basis(4, 1.0, -1.0)


class TestDensityEstimate:
    def test_free_case_peak_value(self):
        sigma = 1.3
        x = np.random.default_rng(0).normal(0.0, sigma, 100_000)[:, None]
        p0 = estimate_density(x, np.array([0.0]))
        assert p0 == pytest.approx(1.0 / (np.sqrt(2 * np.pi) * sigma), rel=0.05)

    def test_translation_equivariance(self):
        rng = np.random.default_rng(1)
        x = rng.normal(0.0, 1.0, (500, 2))
        q = np.array([0.3, -0.4])
        shift = np.array([5.0, -2.0])
        a = estimate_density(x, q)
        b = estimate_density(x + shift, q + shift)
        assert a == pytest.approx(b, rel=1e-12)

    def test_integrates_to_one(self):
        x = np.random.default_rng(2).normal(0.0, 1.0, 2000)[:, None]
        grid = np.linspace(-8, 8, 4001)
        p = estimate_density(x, grid[:, None])
        assert np.trapezoid(p, grid) == pytest.approx(1.0, abs=1e-3)

    def test_strictly_positive_far_away(self):
        x = np.random.default_rng(3).normal(0.0, 1.0, 200)[:, None]
        assert estimate_density(x, np.array([25.0])) > 0.0

    def test_degenerate_coordinate_fallback(self):
        x = np.zeros((50, 1))
        assert np.isfinite(estimate_density(x, np.array([0.0])))

    def test_needs_enough_samples(self):
        with pytest.raises(ConfigurationError):
            estimate_density(np.zeros((5, 1)), np.array([0.0]))


class TestStochasticBasis:
    @staticmethod
    def gaussian_endpoints(n=20_000, sigma=1.0, dim=1, seed=10):
        return np.random.default_rng(seed).normal(0.0, sigma, (n, dim))

    def test_quadrature_identity_exact(self):
        b = build_stochastic_basis(self.gaussian_endpoints(), 100, RngStream(1))
        assert np.sum(b.weights * b.densities) == pytest.approx(1.0, abs=1e-12)

    def test_second_moment_quadrature(self):
        # sum_i w_i P(x_i) g(x_i) is the plain Monte Carlo estimator of <g>
        endpoints = self.gaussian_endpoints(sigma=1.0)
        b = build_stochastic_basis(endpoints, 100, RngStream(2))
        est = np.sum(b.weights * b.densities * b.positions[:, 0] ** 2)
        assert est == pytest.approx(1.0, rel=0.15)

    def test_empirical_measure_matches_ensemble_average(self):
        endpoints = self.gaussian_endpoints(n=30_000, seed=11)
        b = build_stochastic_basis(endpoints, 400, RngStream(3))
        x_nodes = b.positions[:, 0]
        x_all = endpoints[:, 0]
        for g in (lambda x: x, lambda x: x**2, lambda x: np.exp(-x**2)):
            quad = np.sum(b.weights * b.densities * g(x_nodes))
            full = g(x_all).mean()
            err = np.sqrt(g(x_nodes).var() / len(x_nodes)
                          + g(x_all).var() / len(x_all))
            assert abs(quad - full) <= 3 * err

    def test_single_node(self):
        b = build_stochastic_basis(self.gaussian_endpoints(n=200), 1, RngStream(4))
        assert len(b) == 1
        assert b.weights[0] == pytest.approx(1.0 / b.densities[0], rel=1e-12)

    def test_free_density_mode_matches_closed_form(self):
        fp = FreeKernelParams(mass=1.0, hbar=1.0, transition_time=1.0)
        endpoints = self.gaussian_endpoints(n=5000, sigma=1.0, dim=2, seed=12)
        b = build_stochastic_basis(endpoints, 50, RngStream(5),
                                   density_mode="free", free_params=fp)
        expect = free_endpoint_density(b.positions, fp)
        assert np.allclose(b.densities, expect, rtol=1e-12)

    def test_deterministic_given_seed(self):
        endpoints = self.gaussian_endpoints(n=3000)
        a = build_stochastic_basis(endpoints, 64, RngStream(6))
        b = build_stochastic_basis(endpoints, 64, RngStream(6))
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.weights, b.weights)

    def test_near_coincident_nodes_merged(self):
        rng = np.random.default_rng(13)
        distinct = rng.normal(0.0, 1.0, (40, 1))
        endpoints = np.vstack([distinct] + [distinct[:5]] * 30)
        b = build_stochastic_basis(endpoints, 40, RngStream(7))
        gaps = np.abs(b.positions[:, 0][:, None] - b.positions[:, 0][None, :])
        np.fill_diagonal(gaps, np.inf)
        assert gaps.min() > 1e-6 * endpoints.std()

    def test_deficit_after_merging_raises(self):
        endpoints = np.vstack([np.full((80, 1), 0.123), np.full((80, 1), -0.7)])
        with pytest.raises(SamplingError, match="distinct"):
            build_stochastic_basis(endpoints, 3, RngStream(8))

    def test_ensemble_too_small_raises(self):
        with pytest.raises(SamplingError):
            build_stochastic_basis(self.gaussian_endpoints(n=50), 51, RngStream(9))

    def test_all_weights_positive_finite(self):
        b = build_stochastic_basis(self.gaussian_endpoints(dim=3, n=4000), 80,
                                   RngStream(10))
        assert np.all(b.weights > 0) and np.all(np.isfinite(b.weights))
        assert b.dimension == 3


class TestSerialization:
    def test_round_trip(self, tmp_path):
        endpoints = TestStochasticBasis.gaussian_endpoints(n=2000, dim=2)
        b = build_stochastic_basis(endpoints, 30, RngStream(11))
        path = tmp_path / "basis.txt"
        save_basis(path, b, header_lines=["test header"])
        loaded = load_basis(path)
        assert loaded.flavor == "stochastic"
        assert loaded.dimension == 2
        assert np.allclose(loaded.positions, b.positions, rtol=0, atol=0)
        assert np.allclose(loaded.weights, b.weights, rtol=0, atol=0)
        assert np.allclose(loaded.densities, b.densities, rtol=0, atol=0)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("# nothing\n")
        with pytest.raises(ConfigurationError):
            load_basis(path)


def test_basis_rejects_nonpositive_weights():
    with pytest.raises(ConfigurationError):
        Basis(np.zeros((2, 1)), np.array([1.0, 0.0]), np.array([1.0, 1.0]),
              "regular", 1)
