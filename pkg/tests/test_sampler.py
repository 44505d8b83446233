import numpy as np
import pytest
from scipy import stats as sstats

from effham.errors import ConfigurationError
from effham.freekernel import FreeKernelParams, free_propagator
from effham.model import FieldPath, LatticeParams, ModelParams, total_action
from effham.oracle import mehler_kernel
from effham.sampler import (MetropolisConfig, RngStream, estimate_sv_factor,
                            sample_bridges, sample_brownian_bridge,
                            sample_endpoint_ensemble, sample_periodic_lattice)
from effham.stats import series_stats
from helpers import (bridge_covariance, gaussian_weight_expectation,
                     periodic_chain_covariance, pinned_chain_covariance)

FREE = ModelParams(omega=0.0, omega0=0.0, lam=0.0)
HARMONIC = ModelParams(omega=0.0, omega0=2.0, lam=0.0)


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(7).child(1, 2).generator().standard_normal(5)
        b = RngStream(7).child(1, 2).generator().standard_normal(5)
        assert np.array_equal(a, b)

    def test_children_independent_of_creation_order(self):
        root = RngStream(7)
        c12 = root.child(1).child(2).generator().standard_normal(3)
        c3 = root.child(3).generator().standard_normal(3)
        again = RngStream(7).child(3).generator().standard_normal(3)
        assert np.array_equal(c3, again)
        assert not np.array_equal(c12, c3)


class TestBrownianBridge:
    LP = LatticeParams(n_sites=1, n_time=30, a_t=1.0 / 30)

    def test_endpoints_pinned_exactly(self):
        b = sample_bridges([0.3], [-1.2], 50, self.LP, FREE,
                           np.random.default_rng(0))
        assert np.all(b[:, 0, 0] == 0.3)
        assert np.allclose(b[:, -1, 0], -1.2, atol=1e-15)

    def test_single_path_is_fixed_boundary(self):
        path = sample_brownian_bridge([0.0], [1.0], self.LP, HARMONIC,
                                      RngStream(2))
        assert isinstance(path, FieldPath) and not path.periodic_time
        assert path.values.shape == (31, 1)

    def test_midpoint_mean_symmetric(self):
        b = sample_bridges([0.0], [0.0], 100_000, self.LP, FREE,
                           np.random.default_rng(1))
        mid = b[:, 15, 0]
        var = 15 * 15 / 30 * self.LP.a_t  # k (N_t - k) a_t / N_t
        assert abs(mid.mean()) < 4 * np.sqrt(var / mid.size)

    def test_midpoint_mean_interpolates(self):
        b = sample_bridges([0.0], [1.0], 100_000, self.LP, FREE,
                           np.random.default_rng(2))
        mid = b[:, 15, 0]
        assert abs(mid.mean() - 0.5) < 4 * mid.std() / np.sqrt(mid.size)

    def test_midpoint_variance(self):
        b = sample_bridges([0.0], [0.0], 100_000, self.LP, FREE,
                           np.random.default_rng(3))
        assert b[:, 15, 0].var() == pytest.approx(0.25, rel=0.03)

    def test_full_covariance_against_dense_oracle(self):
        lp = LatticeParams(n_sites=1, n_time=4, a_t=0.25)
        b = sample_bridges([0.0], [1.0], 200_000, lp, FREE,
                           np.random.default_rng(4))
        interior = b[:, 1:4, 0]
        cov = bridge_covariance(4, 0.25)
        assert np.abs(np.cov(interior.T) - cov).max() < 0.005 * cov.max() * 4
        assert np.allclose(interior.mean(axis=0), [0.25, 0.5, 0.75], atol=0.004)

    def test_sites_independent(self):
        lp = LatticeParams(n_sites=2, n_time=8, a_t=0.25)
        b = sample_bridges([0.0, 0.0], [0.0, 0.0], 100_000, lp, FREE,
                           np.random.default_rng(5))
        corr = np.corrcoef(b[:, 4, 0], b[:, 4, 1])[0, 1]
        assert abs(corr) < 0.02


class TestSvFactor:
    def test_free_theory_exactly_one(self):
        lp = LatticeParams(n_sites=1, n_time=30, a_t=1.0 / 30)
        st = estimate_sv_factor([0.0], [0.0], 500, lp, FREE, RngStream(1))
        assert st.mean == 1.0
        assert st.std_error == 0.0

    def test_harmonic_matches_mehler_ratio(self):
        # exact ratio of interacting to free kernel at coinciding endpoints,
        # plus the exact finite-a_t value from the dense Gaussian oracle
        lp = LatticeParams(n_sites=1, n_time=100, a_t=0.01)
        st = estimate_sv_factor([0.0], [0.0], 30_000, lp, HARMONIC,
                                RngStream(7).child(1))
        mehler_ratio = mehler_kernel(0, 0, 1.0, omega=2.0) / free_propagator(
            0, 0, FreeKernelParams(1.0, 1.0, 1.0))
        cov = bridge_covariance(lp.n_time, lp.a_t)
        exact = gaussian_weight_expectation(
            cov, np.zeros(lp.n_time - 1), np.full(lp.n_time - 1, lp.a_t * 4.0))
        assert abs(st.mean - exact) < 3 * st.std_error
        assert abs(st.mean - mehler_ratio) < 3 * st.std_error + 1e-4

    def test_mean_decreases_with_quartic_coupling(self):
        lp = LatticeParams(n_sites=1, n_time=20, a_t=0.05)
        means = []
        for lam in (0.0, 1.0):
            mp = ModelParams(omega=0.0, omega0=2.0, lam=lam)
            means.append(estimate_sv_factor([0.4], [0.4], 2000, lp, mp,
                                            RngStream(9)).mean)
        assert means[1] < means[0] <= 1.0

    def test_mean_in_unit_interval_for_nonnegative_potential(self):
        lp = LatticeParams(n_sites=2, n_time=10, a_t=0.1)
        mp = ModelParams(omega=1.0, omega0=2.0, lam=1.0)
        st = estimate_sv_factor([0.2, -0.1], [0.0, 0.3], 500, lp, mp,
                                RngStream(3))
        assert 0.0 < st.mean <= 1.0

    def test_chunking_does_not_change_stream(self):
        import effham.sampler as sampler_mod
        lp = LatticeParams(n_sites=1, n_time=50, a_t=0.02)
        a = estimate_sv_factor([0.0], [0.5], 5000, lp, HARMONIC, RngStream(4))
        old = sampler_mod._BRIDGE_CHUNK_VALUES
        try:
            sampler_mod._BRIDGE_CHUNK_VALUES = 60_000  # force many chunks
            b = estimate_sv_factor([0.0], [0.5], 5000, lp, HARMONIC, RngStream(4))
        finally:
            sampler_mod._BRIDGE_CHUNK_VALUES = old
        assert a.mean == pytest.approx(b.mean, rel=1e-12)


class TestEndpointEnsemble:
    def test_free_endpoints_gaussian_ks(self):
        # free theory: endpoint density is the Gaussian with sigma^2 = hbar T / m
        lp = LatticeParams(n_sites=1, n_time=16, a_t=1.0 / 16)
        ens = sample_endpoint_ensemble(
            10_000, lp, FREE, RngStream(21),
            MetropolisConfig(thermalization=3000, decorrelation=4000))
        d = sstats.kstest(ens.endpoints[:, 0], sstats.norm(scale=1.0).cdf).statistic
        assert d < 1.628 / np.sqrt(10_000)  # 1% critical value

    def test_harmonic_endpoint_variance_vs_dense_oracle(self):
        lp = LatticeParams(n_sites=1, n_time=4, a_t=0.25)
        ens = sample_endpoint_ensemble(
            20_000, lp, HARMONIC, RngStream(22),
            MetropolisConfig(thermalization=1000, decorrelation=10))
        oracle = pinned_chain_covariance(lp.n_time, lp.a_t, omega=2.0)[-1, -1]
        assert ens.endpoints[:, 0].var() == pytest.approx(oracle, rel=0.03)

    def test_sign_symmetry(self):
        lp = LatticeParams(n_sites=2, n_time=8, a_t=0.25)
        mp = ModelParams(omega=1.0, omega0=2.0, lam=1.0)
        ens = sample_endpoint_ensemble(
            5000, lp, mp, RngStream(23),
            MetropolisConfig(thermalization=1000, decorrelation=20))
        for site in range(2):
            st = series_stats(ens.endpoints[:, site])
            assert abs(st.mean) < 4 * st.std_error

    def test_deterministic_given_stream(self):
        lp = LatticeParams(n_sites=1, n_time=8, a_t=0.25)
        cfg = MetropolisConfig(thermalization=100, decorrelation=5)
        a = sample_endpoint_ensemble(200, lp, HARMONIC, RngStream(5), cfg)
        b = sample_endpoint_ensemble(200, lp, HARMONIC, RngStream(5), cfg)
        assert np.array_equal(a.endpoints, b.endpoints)
        assert a.step == b.step


class TestPeriodicLattice:
    def test_phi_squared_vs_dense_oracle(self):
        lp = LatticeParams(n_sites=1, n_time=8, a_t=0.25)
        ens = sample_periodic_lattice(
            20_000, lp, HARMONIC, RngStream(31),
            MetropolisConfig(thermalization=1000, decorrelation=10))
        oracle = np.trace(periodic_chain_covariance(8, 0.25, omega=2.0)) / 8
        st = series_stats((ens.configs**2).mean(axis=(1, 2)))
        assert abs(st.mean - oracle) < 3 * st.std_error

    def test_mean_field_vanishes(self):
        lp = LatticeParams(n_sites=1, n_time=8, a_t=0.25)
        ens = sample_periodic_lattice(
            10_000, lp, HARMONIC, RngStream(32),
            MetropolisConfig(thermalization=1000, decorrelation=10))
        st = series_stats(ens.configs.mean(axis=(1, 2)))
        assert abs(st.mean) < 4 * st.std_error

    def test_error_scales_with_ensemble_size(self):
        lp = LatticeParams(n_sites=1, n_time=6, a_t=0.25)
        cfg = MetropolisConfig(thermalization=1000, decorrelation=25)
        errs = []
        for n, seed in ((4000, 41), (8000, 42)):
            ens = sample_periodic_lattice(n, lp, HARMONIC, RngStream(seed), cfg)
            errs.append(series_stats((ens.configs**2).mean(axis=(1, 2))).std_error)
        assert errs[0] / errs[1] == pytest.approx(np.sqrt(2.0), rel=0.2)

    def test_rejects_tiny_ensembles(self):
        lp = LatticeParams(n_sites=1, n_time=4, a_t=0.25)
        with pytest.raises(ConfigurationError):
            sample_periodic_lattice(1, lp, HARMONIC, RngStream(1))


class TestDetailedBalance:
    def test_stationary_distribution_of_toy_chain(self):
        # two periodic slices, each variable on {-d, 0, d}: the Metropolis
        # kernel built from the real action must leave exp(-S)/Z invariant
        lp = LatticeParams(n_sites=1, n_time=2, a_t=0.5)
        mp = ModelParams(omega=0.0, omega0=2.0, lam=1.0)
        levels = np.array([-0.8, 0.0, 0.8])
        states = [(a, b) for a in range(3) for b in range(3)]
        actions = np.array([
            total_action(FieldPath(np.array([[levels[a]], [levels[b]]]),
                                   periodic_time=True), mp, lp)
            for a, b in states])
        boltzmann = np.exp(-actions)
        boltzmann /= boltzmann.sum()

        def var_kernel(slot):
            t = np.zeros((9, 9))
            for i, s in enumerate(states):
                stay = 1.0
                for new in range(3):
                    if new == s[slot]:
                        continue
                    target = list(s)
                    target[slot] = new
                    j = states.index(tuple(target))
                    acc = min(1.0, np.exp(actions[i] - actions[j]))
                    t[j, i] = 0.5 * acc
                    stay -= 0.5 * acc
                t[i, i] = stay
            return t

        sweep = var_kernel(1) @ var_kernel(0)
        pi = np.full(9, 1.0 / 9.0)
        for _ in range(6000):
            pi = sweep @ pi
        assert np.abs(pi - boltzmann).max() < 1e-3
