import numpy as np
import pytest
from scipy import stats

from bct.mcmc import ChainConfig, GibbsSampler, run_chain, run_chains, truncated_normal
from bct.model import Dataset, ModelSpec, vector_to_correlations
from bct.simulate import consistency_design, generate_dataset

from conftest import continuous_bivariate


def ordinal_dataset(rng, n=400, levels=3, rho=0.4):
    """Continuous + one ordinal outcome with the given latent correlation."""
    C = np.array([[1.0, rho], [rho, 1.0]])
    latent = 0.5 + rng.standard_normal((n, 2)) @ np.linalg.cholesky(C).T
    cuts = np.linspace(0.0, 1.2, levels - 1)
    cats = np.searchsorted(np.concatenate(([-np.inf], cuts, [np.inf])), latent[:, 1], side="left")
    for k in range(1, levels + 1):  # guarantee every category shows up
        cats[k - 1] = k
    spec = ModelSpec(
        ordinal=(False, True), levels=(0, levels), n_covariates=1, group_sizes=(n,)
    )
    return Dataset(
        spec=spec,
        continuous=(latent[:, :1],),
        ordinal=(cats[:, None],),
        covariates=(np.ones((n, 1)),),
    )


class TestTruncatedNormal:
    def test_bounds_respected(self, rng):
        lo = np.array([-1.0, 0.5, -np.inf, 2.0])
        hi = np.array([0.0, 1.5, -2.0, np.inf])
        draws = truncated_normal(lo, hi, 0.0, 1.0, rng)
        assert np.all(draws > lo) and np.all(draws <= hi)

    def test_half_normal_mean(self, rng):
        z = truncated_normal(-np.inf, 0.0, np.zeros(200_000), 1.0, rng)
        assert z.mean() == pytest.approx(-np.sqrt(2.0 / np.pi), abs=0.01)

    @pytest.mark.parametrize("a,b", [(-1.0, 1.0), (0.5, 2.0), (-np.inf, -0.5), (3.0, np.inf)])
    def test_moments_match_scipy(self, rng, a, b):
        draws = truncated_normal(np.full(150_000, a), b, 1.0, 2.0, rng)
        a_std, b_std = (a - 1.0) / 2.0, (b - 1.0) / 2.0
        ref = stats.truncnorm(a_std, b_std, loc=1.0, scale=2.0)
        assert draws.mean() == pytest.approx(ref.mean(), abs=4 * ref.std() / np.sqrt(150_000) + 1e-3)
        assert draws.std() == pytest.approx(ref.std(), rel=0.02)

    def test_far_tail_is_finite(self, rng):
        draws = truncated_normal(np.full(1000, 12.0), np.inf, 0.0, 1.0, rng)
        assert np.all(np.isfinite(draws)) and np.all(draws > 12.0)


class TestLatentStep:
    def test_half_normal_conditional(self, rng):
        n = 40_000
        cats = np.tile([1, 2], n // 2)[:, None]
        spec = ModelSpec(ordinal=(False, True), levels=(0, 2), n_covariates=1, group_sizes=(n,))
        data = Dataset(
            spec=spec,
            continuous=(rng.standard_normal((n, 1)),),
            ordinal=(cats,),
            covariates=(np.ones((n, 1)),),
        )
        sampler = GibbsSampler(data, ChainConfig(seed=4))
        sampler.C[0] = np.eye(2)
        sampler.B[0][:] = 0.0
        sampler.sigma[0][:] = 1.0
        sampler.step_latents()
        z = sampler._Y[0][:, 1]
        below = z[cats[:, 0] == 1]
        above = z[cats[:, 0] == 2]
        assert np.all(below <= 0.0) and np.all(above > 0.0)
        assert below.mean() == pytest.approx(-np.sqrt(2.0 / np.pi), abs=0.015)
        assert above.mean() == pytest.approx(np.sqrt(2.0 / np.pi), abs=0.015)

    def test_zero_correlation_mean_is_regression_mean(self, rng):
        data = ordinal_dataset(rng, n=20_000, levels=2)
        sampler = GibbsSampler(data, ChainConfig(seed=9))
        sampler.C[0] = np.eye(2)
        sampler.B[0][:] = np.array([[0.0, 0.7]])
        sampler.sigma[0][:] = 1.0
        sampler.step_latents()
        z = sampler._Y[0][:, 1]
        cats = data.ordinal[0][:, 0]
        # with no cross-correlation the conditional is N(0.7, 1) truncated at 0
        expected = stats.truncnorm(-np.inf, (0.0 - 0.7) / 1.0, loc=0.7).mean()
        assert z[cats == 1].mean() == pytest.approx(expected, abs=0.02)

    def test_draws_stay_in_category_intervals(self, rng):
        data = ordinal_dataset(rng, n=300, levels=4)
        sampler = GibbsSampler(data, ChainConfig(seed=2))
        for _ in range(30):
            sampler.iterate()
        sampler.snapshot().validate(data.spec, data)


class TestCoefficientStep:
    def test_matrix_normal_mean_and_covariance(self, rng):
        n, Q, P = 30, 2, 2
        X = np.column_stack([rng.standard_normal(n), np.ones(n)])
        Y = rng.standard_normal((n, P))
        spec = ModelSpec(ordinal=(False, False), levels=(0, 0), n_covariates=Q, group_sizes=(n,))
        data = Dataset(spec=spec, continuous=(Y,), ordinal=(np.zeros((n, 0), int),), covariates=(X,))
        sampler = GibbsSampler(data, ChainConfig(seed=5))
        C = np.array([[1.0, 0.3], [0.3, 1.0]])
        sampler.C[0] = C
        sampler.sigma[0][:] = np.array([1.0, 2.0])
        Sigma = C * np.outer([1.0, 2.0], [1.0, 2.0])
        b_hat = np.linalg.lstsq(X, Y, rcond=None)[0]
        draws = np.empty((8000, Q, P))
        for s in range(draws.shape[0]):
            sampler.step_coefficients()
            draws[s] = sampler.B[0]
        np.testing.assert_allclose(draws.mean(axis=0), b_hat, atol=0.05)
        vec = draws.reshape(draws.shape[0], -1, order="F").T  # column-major vec
        target = np.kron(Sigma, np.linalg.inv(X.T @ X))
        np.testing.assert_allclose(np.cov(vec), target, atol=0.06)

    def test_posterior_mean_is_least_squares(self, rng):
        data = continuous_bivariate(500, 0.3, rng)
        chain = run_chain(data, ChainConfig(burn_in=200, draws=1500, seed=6))
        ols = data.continuous[0].mean(axis=0)
        np.testing.assert_allclose(chain.coefficients.mean(axis=0)[0, 0], ols, atol=0.05)


class TestCorrelationStep:
    def test_always_accepted_and_well_formed(self, rng):
        data = continuous_bivariate(400, 0.8, rng)
        chain = run_chain(data, ChainConfig(burn_in=200, draws=800, seed=7))
        assert chain.acceptance_rates["correlation"] == 1.0
        for rho in chain.rho.draws[::50]:
            C = vector_to_correlations(rho, 2, 1)[0]
            assert np.all(np.diag(C) == 1.0)
            assert np.linalg.eigvalsh(C)[0] > 1e-10

    def test_tracks_sample_correlation(self, rng):
        data = continuous_bivariate(500, 0.8, rng)
        chain = run_chain(data, ChainConfig(burn_in=300, draws=2000, seed=8))
        sample_corr = np.corrcoef(data.continuous[0].T)[0, 1]
        assert chain.rho.draws[:, 0].mean() == pytest.approx(sample_corr, abs=0.05)

    def test_mean_matches_mle_large_n(self, rng):
        data = continuous_bivariate(2000, 0.45, rng)
        chain = run_chain(data, ChainConfig(burn_in=300, draws=2000, seed=9))
        mle = np.corrcoef(data.continuous[0].T)[0, 1]
        assert chain.rho.draws[:, 0].mean() == pytest.approx(mle, abs=0.03)


class TestThresholdStep:
    def test_draw_lies_between_neighbouring_latents(self, rng):
        data = ordinal_dataset(rng, n=300, levels=3)
        sampler = GibbsSampler(data, ChainConfig(seed=3))
        for _ in range(10):
            sampler.iterate()
            z = sampler._Y[0][:, 1]
            cats = data.ordinal[0][:, 0]
            gam = sampler.gamma[0][0]
            assert z[cats == 2].max() <= gam[2] <= z[cats == 3].min()
            assert np.all(np.diff(gam) > 0)

    def test_binary_outcome_keeps_fixed_cutpoints(self, rng):
        data = ordinal_dataset(rng, n=300, levels=2)
        sampler = GibbsSampler(data, ChainConfig(seed=3))
        for _ in range(5):
            sampler.iterate()
        np.testing.assert_array_equal(sampler.gamma[0][0], [-np.inf, 0.0, np.inf])

    def test_identification_zero_threshold(self, rng):
        data = ordinal_dataset(rng, n=300, levels=4)
        sampler = GibbsSampler(data, ChainConfig(seed=12))
        for _ in range(25):
            sampler.iterate()
            assert sampler.gamma[0][0][1] == 0.0


class TestSigmaStep:
    def test_inverse_gamma_oracle(self, rng):
        n = 200
        Y = rng.standard_normal((n, 2)) * np.array([1.5, 0.8])
        spec = ModelSpec(ordinal=(False, False), levels=(0, 0), n_covariates=1, group_sizes=(n,))
        data = Dataset(spec=spec, continuous=(Y,), ordinal=(np.zeros((n, 0), int),), covariates=(np.ones((n, 1)),))
        sampler = GibbsSampler(data, ChainConfig(seed=21))
        sampler.C[0] = np.eye(2)
        sampler.B[0][:] = 0.0
        for _ in range(3000):  # warm up and adapt
            sampler.step_sigmas()
        sampler._adapting = False
        draws = np.empty(25_000)
        for s in range(draws.size):
            sampler.step_sigmas()
            draws[s] = sampler.sigma[0][0]
        # with identity C and zero B the target of sigma^2 is conjugate
        ss = float(np.sum(Y[:, 0] ** 2))
        oracle = stats.invgamma(a=n / 2.0, scale=ss / 2.0)
        for q in (0.25, 0.5, 0.75):
            assert np.quantile(draws**2, q) == pytest.approx(oracle.ppf(q), rel=0.04)

    def test_acceptance_rate_in_band(self, rng):
        data = continuous_bivariate(300, 0.2, rng)
        chain = run_chain(data, ChainConfig(burn_in=500, draws=1500, seed=13))
        for key, rate in chain.acceptance_rates.items():
            if key.startswith("sigma"):
                assert 0.1 < rate < 0.9

    def test_draws_always_positive(self, rng):
        data = continuous_bivariate(120, 0.0, rng)
        chain = run_chain(data, ChainConfig(burn_in=100, draws=500, seed=14))
        assert np.all(chain.sigma > 0.0)


def _integrated_autocorrelation(x):
    x = x - x.mean()
    full = np.correlate(x, x, mode="full")[x.size - 1 :]
    acf = full / full[0]
    total = 1.0
    for k in range(1, min(x.size // 2, 500)):
        if acf[k] <= 0.0:
            break
        total += 2.0 * acf[k]
    return total


class TestExpansionStep:
    def test_state_invariants_preserved(self, rng):
        data = ordinal_dataset(rng, n=250, levels=4)
        sampler = GibbsSampler(data, ChainConfig(seed=17))
        for _ in range(40):
            sampler.iterate()
        sampler.snapshot().validate(data.spec, data)

    def test_categories_unchanged_by_rescaling(self, rng):
        data = ordinal_dataset(rng, n=250, levels=4)
        sampler = GibbsSampler(data, ChainConfig(seed=18))
        before = data.ordinal[0].copy()
        for _ in range(20):
            sampler.iterate()
        np.testing.assert_array_equal(data.ordinal[0], before)

    def test_threshold_mixing_improves(self, rng):
        data = ordinal_dataset(rng, n=400, levels=4, rho=0.3)
        with_px = run_chain(data, ChainConfig(burn_in=500, draws=4000, seed=19, use_expansion=True))
        without = run_chain(data, ChainConfig(burn_in=500, draws=4000, seed=19, use_expansion=False))
        iat_with = _integrated_autocorrelation(with_px.thresholds[0][0][:, 0])
        iat_without = _integrated_autocorrelation(without.thresholds[0][0][:, 0])
        assert iat_with <= iat_without * 1.05


class TestChainDriver:
    def test_seed_reproducibility(self, rng):
        data = generate_dataset(consistency_design(), 0.3, 120, rng)
        a = run_chain(data, ChainConfig(burn_in=100, draws=300, seed=23))
        b = run_chain(data, ChainConfig(burn_in=100, draws=300, seed=23))
        np.testing.assert_array_equal(a.rho.draws, b.rho.draws)
        np.testing.assert_array_equal(a.sigma, b.sigma)

    def test_different_seeds_differ(self, rng):
        data = generate_dataset(consistency_design(), 0.3, 120, rng)
        a = run_chain(data, ChainConfig(burn_in=50, draws=200, seed=23))
        b = run_chain(data, ChainConfig(burn_in=50, draws=200, seed=24))
        assert not np.array_equal(a.rho.draws, b.rho.draws)

    def test_coverage_of_zero_correlation(self, rng):
        hits = 0
        for rep in range(20):
            data = continuous_bivariate(100, 0.0, np.random.default_rng(1000 + rep))
            chain = run_chain(data, ChainConfig(burn_in=300, draws=1200, seed=rep + 1))
            lo, hi = np.quantile(chain.rho.draws[:, 0], [0.025, 0.975])
            hits += lo <= 0.0 <= hi
        assert hits >= 17

    def test_pooled_chains(self, rng):
        data = continuous_bivariate(150, 0.2, rng)
        pooled, singles = run_chains(data, ChainConfig(burn_in=100, draws=400, seed=31), 3)
        assert pooled.rho.draws.shape == (1200, 1)
        assert len(singles) == 3
        np.testing.assert_array_equal(pooled.rho.draws[:400], singles[0].rho.draws)

    def test_small_group_rejected(self, rng):
        data = continuous_bivariate(150, 0.2, rng)
        small = Dataset(
            spec=ModelSpec(ordinal=(False, False), levels=(0, 0), n_covariates=1, group_sizes=(5,)),
            continuous=(data.continuous[0][:5],),
            ordinal=(np.zeros((5, 0), int),),
            covariates=(np.ones((5, 1)),),
        )
        with pytest.raises(ValueError):
            GibbsSampler(small)


class TestMultiPopulation:
    def test_two_groups_recover_their_correlations(self, rng):
        n = 400
        groups = []
        for rho in (0.5, -0.3):
            C = np.array([[1.0, rho], [rho, 1.0]])
            groups.append(rng.standard_normal((n, 2)) @ np.linalg.cholesky(C).T)
        spec = ModelSpec(
            ordinal=(False, False), levels=(0, 0), n_covariates=1, group_sizes=(n, n)
        )
        data = Dataset(
            spec=spec,
            continuous=tuple(groups),
            ordinal=(np.zeros((n, 0), int),) * 2,
            covariates=(np.ones((n, 1)),) * 2,
        )
        chain = run_chain(data, ChainConfig(burn_in=300, draws=1500, seed=41))
        means = chain.rho.draws.mean(axis=0)
        assert means[0] == pytest.approx(np.corrcoef(groups[0].T)[0, 1], abs=0.05)
        assert means[1] == pytest.approx(np.corrcoef(groups[1].T)[0, 1], abs=0.05)
