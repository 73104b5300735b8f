from collections import Counter
import time

import numpy as np
import pytest

from errors import DomainError, NumericalError, SamplerError
import inference
import lossprior
import randmat
import varcore


def test_parse_nu_scheme():
    assert inference.parse_nu_scheme('loss') == inference.LossBasedNu()
    assert inference.parse_nu_scheme('fixed:7') == inference.FixedNu(7)
    assert inference.FixedNu(4).label() == 'fixed:4'
    for bad in ('fixed', 'fixed:x', 'uniform'):
        with pytest.raises(DomainError):
            inference.parse_nu_scheme(bad)


def test_sampler_config_validation():
    assert inference.SamplerConfig(iterations=10, burn_in=4, thin=2).retained == 3
    with pytest.raises(DomainError):
        inference.SamplerConfig(iterations=10, burn_in=10)
    with pytest.raises(DomainError):
        inference.SamplerConfig(thin=0)
    with pytest.raises(DomainError):
        inference.SamplerConfig(mh_step=0)
    config = inference.SamplerConfig(seed=5).with_stream(9)
    assert (config.seed, config.stream_id) == (5, 9)


def test_prior_construction():
    prior = inference.NormalWishartPrior.default(3, 4)
    assert (prior.m, prior.k) == (3, 4)
    assert prior.loss_based and prior.initial_nu() == 4
    np.testing.assert_allclose(prior.precision, 0.1 * np.eye(12))
    fixed = prior.with_scheme(inference.FixedNu(9))
    assert not fixed.loss_based and fixed.initial_nu() == 9
    np.testing.assert_array_equal(inference.NormalWishartPrior.diffuse(2, 2).precision, np.zeros((4, 4)))
    with pytest.raises(DomainError):
        inference.NormalWishartPrior.default(3, 1, inference.FixedNu(2))
    with pytest.raises(DomainError):
        inference.NormalWishartPrior(np.zeros(4), np.eye(3), np.eye(2))


def test_proposals_skip_the_current_state(rng):
    proposals = Counter(inference.propose_nu(10, 3, rng) - 10 for _ in range(6000))
    assert set(proposals) == {-3, -2, -1, 1, 2, 3}
    assert min(proposals.values()) > 850


def test_metropolis_accept():
    assert inference.metropolis_accept(0.5, 0.999)
    assert inference.metropolis_accept(np.log(0.3), 0.29)
    assert not inference.metropolis_accept(np.log(0.3), 0.31)


def test_mh_chain_matches_enumerated_posterior():
    started = time.perf_counter()
    m = 2
    precision, s0 = 5.0 * np.eye(m), np.eye(m)
    prior = inference.NormalWishartPrior.default(m, 1, s0=s0)
    target = lossprior.NuConditional(precision, s0)
    rng = randmat.RngStream(2024, 1)
    nu, sweeps, burn_in = m + 1, 200000, 1000
    counts = Counter()
    for sweep in range(sweeps + burn_in):
        nu, _ = inference.draw_nu(nu, precision, prior, 3, rng, target)
        if sweep >= burn_in:
            counts[nu] += 1

    exact = lossprior.enumerate_posterior_nu(precision, s0, nu_max=400)
    empirical = np.array([counts.get(int(v), 0) for v in exact.nu_values]) / sweeps
    total_variation = 0.5 * np.sum(np.abs(empirical - exact.probabilities))
    assert total_variation < 0.02
    assert time.perf_counter() - started < 60.0


def _ar1(rng, n=200, coefficient=0.5):
    data, _ = varcore.simulate_var(1, n, 1, [np.array([[coefficient]])], np.array([[1.0]]), rng)
    return varcore.build_lag_design(data, 1)


def test_single_equation_gibbs_matches_conjugate_posterior():
    design = _ar1(randmat.RngStream(77, 0))
    nu0, s0 = 3, np.array([[1.0]])
    prior = inference.NormalWishartPrior.diffuse(1, 1, inference.FixedNu(nu0), s0)
    config = inference.SamplerConfig(iterations=61000, burn_in=1000, seed=5)
    draws = inference.run_gibbs(design, prior, config)

    x, y = design.X[:, 0], design.Y[:, 0]
    xtx = x @ x
    estimate = (x @ y) / xtx
    sse = np.sum((y - estimate * x) ** 2)
    # alpha | y is Student-t: location estimate, variance (S0 + SSE) / (X'X (n + nu0 - 3))
    variance = (s0[0, 0] + sse) / (xtx * (design.T_eff + nu0 - 3))
    assert draws.alpha_draws[:, 0].mean() == pytest.approx(estimate, rel=0.02)
    assert draws.alpha_draws[:, 0].var() == pytest.approx(variance, rel=0.02)


def test_run_gibbs_is_reproducible(simulated_data, fast_sampler):
    data, _ = simulated_data
    design = varcore.build_lag_design(data, 1)
    prior = inference.NormalWishartPrior.default(3, design.k)
    first = inference.run_gibbs(design, prior, fast_sampler)
    second = inference.run_gibbs(design, prior, fast_sampler)
    np.testing.assert_array_equal(first.alpha_draws, second.alpha_draws)
    np.testing.assert_array_equal(first.nu_draws, second.nu_draws)
    assert len(first) == fast_sampler.retained
    assert first.sigma_draws.shape == (200, 3, 3)
    assert np.all(first.nu_draws >= 3)
    assert 0.0 < first.mh_acceptance_rate < 1.0
    assert first.scheme == 'loss'


def test_fixed_scheme_has_no_nu_draws(simulated_data, fast_sampler):
    data, _ = simulated_data
    design = varcore.build_lag_design(data, 1)
    prior = inference.NormalWishartPrior.default(3, design.k, inference.FixedNu(4))
    draws = inference.run_gibbs(design, prior, fast_sampler)
    assert draws.nu_draws.size == 0
    assert draws.mh_acceptance_rate == 0.0
    summary = inference.summarize(draws)
    assert summary.nu_mean is None
    assert summary.to_dict()['scheme'] == 'fixed:4'


def test_run_gibbs_checks_dimensions(simulated_data, fast_sampler):
    data, _ = simulated_data
    design = varcore.build_lag_design(data, 1)
    with pytest.raises(DomainError):
        inference.run_gibbs(design, inference.NormalWishartPrior.default(3, 4), fast_sampler)


def test_numerical_breakdown_becomes_sampler_error(simulated_data, fast_sampler, monkeypatch):
    data, _ = simulated_data
    design = varcore.build_lag_design(data, 1)
    calls = []

    def failing(*args, **kwargs):
        calls.append(1)
        if len(calls) == 5:
            raise NumericalError('S_bar is not positive definite', diagnostic='forced')
        return np.eye(3)

    monkeypatch.setattr(inference, 'draw_sigma_inv', failing)
    with pytest.raises(SamplerError) as raised:
        inference.run_gibbs(design, inference.NormalWishartPrior.default(3, 3), fast_sampler)
    assert raised.value.sweep == 4
    assert raised.value.retained == 0
    assert raised.value.diagnostic == 'forced'


def test_alpha_posterior_precision_is_kronecker(simulated_data):
    data, _ = simulated_data
    design = varcore.build_lag_design(data, 1)
    prior = inference.NormalWishartPrior.default(3, 3)
    sigma_inv = np.diag([1.0, 2.0, 0.5])
    mean, factor = inference.alpha_posterior(design, sigma_inv, prior)
    precision = prior.precision + np.kron(sigma_inv, design.X.T @ design.X)
    np.testing.assert_allclose(factor @ factor.T, precision, rtol=1e-10)
    np.testing.assert_allclose(precision @ mean, varcore.vectorize(design.X.T @ design.Y @ sigma_inv), rtol=1e-8)


def test_sigma_posterior_parameters(simulated_data):
    data, _ = simulated_data
    design = varcore.build_lag_design(data, 1)
    prior = inference.NormalWishartPrior.default(3, 3)
    alpha = varcore.vectorize(0.5 * np.eye(3))
    nu_bar, s_bar = inference.sigma_posterior(design, alpha, prior, 4)
    E = varcore.residuals(design, 0.5 * np.eye(3))
    assert nu_bar == 4 + design.T_eff
    np.testing.assert_allclose(s_bar, np.eye(3) + E.T @ E)
    with pytest.raises(DomainError):
        inference.draw_sigma_inv(design, alpha, prior, 2, randmat.RngStream(1, 1))


def test_discrete_hpd():
    values = [5] * 50 + [6] * 30 + [7] * 15 + [8] * 5
    chosen, low, high = inference.discrete_hpd(values)
    assert chosen == [5, 6, 7] and (low, high) == (5, 7)
    chosen, low, high = inference.discrete_hpd([3, 3, 4, 4], mass=0.5)
    assert chosen == [3]
    with pytest.raises(DomainError):
        inference.discrete_hpd([])


def test_summary_fields(simulated_data, fast_sampler):
    data, _ = simulated_data
    design = varcore.build_lag_design(data, 1)
    draws = inference.run_gibbs(design, inference.NormalWishartPrior.default(3, 3), fast_sampler)
    summary = inference.summarize(draws).to_dict()
    for key in ('nu_mean', 'nu_hpd_low', 'nu_hpd_high', 'mh_acceptance'):
        assert summary[key] is not None
    assert 3 <= summary['nu_hpd_low'] <= summary['nu_hpd_high']


def test_diffuse_posterior_mean_is_ols(simulated_data):
    data, _ = simulated_data
    design = varcore.build_lag_design(data, 1, intercept=True)
    prior = inference.NormalWishartPrior.diffuse(3, design.k)
    sigma_inv = np.array([[2.0, 0.4, -0.3], [0.4, 1.0, 0.2], [-0.3, 0.2, 0.7]])
    mean, _ = inference.alpha_posterior(design, sigma_inv, prior)
    # identical regressors in every equation: GLS collapses to equation-by-equation OLS
    np.testing.assert_allclose(mean, varcore.vectorize(varcore.ols(design)), rtol=0.0, atol=1e-8)


def test_empty_regressors_return_the_prior(spd3):
    m, k = 3, 2
    Y = np.random.default_rng(4).normal(size=(25, m))
    design = varcore.LagDesign(1, Y, np.zeros((25, k)))
    V0 = np.kron(spd3, np.diag([2.0, 0.5]))
    prior = inference.NormalWishartPrior(np.arange(k * m, dtype=float), V0, np.eye(m))
    mean, factor = inference.alpha_posterior(design, np.eye(m), prior)
    np.testing.assert_allclose(mean, prior.alpha0, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(factor @ factor.T, np.linalg.inv(V0), rtol=1e-10, atol=1e-12)


def test_alpha_posterior_matches_per_observation_sums(simulated_data):
    data, _ = simulated_data
    design = varcore.build_lag_design(data, 2, intercept=True)
    m = design.m
    prior = inference.NormalWishartPrior.default(m, design.k, v0_scale=3.0)
    sigma_inv = np.array([[1.5, 0.2, 0.0], [0.2, 0.8, -0.1], [0.0, -0.1, 1.1]])
    precision = prior.precision.copy()
    shift = prior.precision_mean.copy()
    for x_t, y_t in zip(design.X, design.Y):
        Z_t = np.kron(np.eye(m), x_t[np.newaxis, :])
        precision += Z_t.T @ sigma_inv @ Z_t
        shift += Z_t.T @ sigma_inv @ y_t
    mean, factor = inference.alpha_posterior(design, sigma_inv, prior)
    np.testing.assert_allclose(factor @ factor.T, precision, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(mean, np.linalg.solve(precision, shift), rtol=1e-8, atol=1e-10)


def test_precision_draws_average_to_the_wishart_mean(simulated_data):
    data, _ = simulated_data
    design = varcore.build_lag_design(data, 1)
    prior = inference.NormalWishartPrior.default(3, 3)
    alpha = varcore.vectorize(0.4 * np.eye(3))
    nu_bar, s_bar = inference.sigma_posterior(design, alpha, prior, 5)
    scale = np.linalg.inv(s_bar)
    rng = randmat.RngStream(91, 0)
    n = 50000
    draws = np.array([inference.draw_sigma_inv(design, alpha, prior, 5, rng) for _ in range(n)])
    # Var(W_ij) = nu (V_ij^2 + V_ii V_jj)
    standard_error = np.sqrt(nu_bar * (scale ** 2 + np.outer(np.diag(scale), np.diag(scale))) / n)
    assert np.all(np.abs(draws.mean(axis=0) - nu_bar * scale) < 5.0 * standard_error)


def test_gibbs_recovers_a_bivariate_var():
    coeffs = [np.array([[0.5, 0.2], [-0.1, 0.3]])]
    sigma = np.array([[1.0, 0.3], [0.3, 0.5]])
    data, truth = varcore.simulate_var(2, 500, 1, coeffs, sigma, randmat.RngStream(61, 0))
    design = varcore.build_lag_design(data, 1)
    prior = inference.NormalWishartPrior.default(2, design.k)
    draws = inference.run_gibbs(design, prior, inference.SamplerConfig(iterations=2000, burn_in=500, seed=61))
    spread = draws.alpha_draws.std(axis=0)
    assert np.all(np.abs(draws.alpha_draws.mean(axis=0) - varcore.vectorize(truth.A)) < 3.0 * spread)
    sigma_spread = draws.sigma_draws.std(axis=0)
    assert np.all(np.abs(draws.sigma_draws.mean(axis=0) - truth.Sigma) < 4.0 * sigma_spread)


@pytest.mark.slow
def test_gibbs_recovers_the_degrees_of_freedom():
    m, nu_true = 5, 15
    scale = varcore.default_generation_scale(m, nu_true)
    data, _ = varcore.simulate_var(m, 400, 1, varcore.default_coefficients(m, 1),
                                   varcore.InverseWishartSource(nu_true, scale), randmat.RngStream(15, 0))
    design = varcore.build_lag_design(data, 1)
    prior = inference.NormalWishartPrior.default(m, design.k, s0=scale)
    draws = inference.run_gibbs(design, prior, inference.SamplerConfig(iterations=6000, burn_in=1000, seed=15))
    mode = int(np.argmax(np.bincount(draws.nu_draws)))
    assert 10 <= mode <= 20
