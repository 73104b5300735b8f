import numpy as np
import pytest
from scipy import integrate, stats

from errors import DomainError, NotPositiveDefiniteError
import randmat


def test_streams_replay_and_separate():
    first = randmat.RngStream(42, 3).standard_normal(5)
    again = randmat.RngStream(42, 3).standard_normal(5)
    other = randmat.RngStream(42, 4).standard_normal(5)
    np.testing.assert_array_equal(first, again)
    assert not np.allclose(first, other)


def test_substream():
    stream = randmat.RngStream(9, 1)
    first = stream.uniform()
    assert randmat.RngStream(9, 1).uniform() == first
    sub = stream.substream('predictive')
    assert sub.seed == 9
    assert sub.stream_id == randmat.stream_key(1, 'predictive')


def test_stream_key_is_a_stable_64_bit_hash():
    key = randmat.stream_key(20240101, 5, 30, 15, 7, 0)
    assert key == randmat.stream_key(20240101, 5, 30, 15, 7, 0)
    assert key != randmat.stream_key(20240101, 5, 30, 15, 7, 1)
    assert 0 <= key < 2 ** 64


def test_integers_stay_in_range(rng):
    values = [rng.integers(-3, 3) for _ in range(500)]
    assert min(values) == -3
    assert max(values) == 2


def test_chisquare_mean(rng):
    draws = np.array([rng.chisquare(4.0) for _ in range(20000)])
    assert draws.mean() == pytest.approx(4.0, rel=0.03)


def test_cholesky_rejects_bad_matrices():
    with pytest.raises(NotPositiveDefiniteError):
        randmat.cholesky_spd(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(DomainError):
        randmat.cholesky_spd(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(DomainError):
        randmat.cholesky_spd(np.ones((2, 3)))
    with pytest.raises(NotPositiveDefiniteError):
        randmat.cholesky_spd(-np.eye(2))


def test_inverse_and_log_det(spd3):
    np.testing.assert_allclose(randmat.spd_inverse(spd3) @ spd3, np.eye(3), atol=1e-12)
    assert randmat.log_det_spd(spd3) == pytest.approx(np.log(np.linalg.det(spd3)), rel=1e-12)


def test_sample_mvn_with_fixed_normals(spd3, rng):
    mean = np.array([1.0, -2.0, 0.5])
    z = np.array([0.3, -1.1, 2.0])
    expected = mean + np.linalg.cholesky(spd3) @ z
    np.testing.assert_allclose(randmat.sample_mvn(mean, spd3, rng, z=z), expected, rtol=1e-12)


def test_sample_mvn_dimension_mismatch(spd3, rng):
    with pytest.raises(DomainError):
        randmat.sample_mvn(np.zeros(2), spd3, rng)


def test_bartlett_factor_shape(rng):
    factor = randmat.bartlett_factor(6, 4, rng)
    assert np.allclose(np.triu(factor, 1), 0.0)
    assert np.all(np.diag(factor) > 0.0)


def test_wishart_draws_have_mean_nu_scale(rng):
    scale = np.array([[1.0, 0.3], [0.3, 2.0]])
    factor = randmat.cholesky_spd(scale)
    draws = np.array([randmat.sample_wishart(5, scale, rng, factor) for _ in range(4000)])
    np.testing.assert_allclose(draws.mean(axis=0), 5 * scale, rtol=0.05, atol=0.1)
    assert np.all(np.linalg.eigvalsh(draws[:50]) > 0.0)


def test_wishart_rejects_bad_degrees_of_freedom(rng):
    with pytest.raises(DomainError):
        randmat.sample_wishart(2, np.eye(3), rng)
    with pytest.raises(DomainError):
        randmat.sample_wishart(4.5, np.eye(3), rng)


def test_inverse_wishart_mean(rng):
    scale = 5.0 * np.eye(2)
    draws = np.array([randmat.sample_inverse_wishart(8, scale, rng) for _ in range(4000)])
    # E[Sigma] = scale / (nu - m - 1)
    np.testing.assert_allclose(draws.mean(axis=0), np.eye(2), atol=0.06)


def test_wishart_log_density_matches_scipy(spd3):
    x = np.array([[4.0, 0.5, 0.2], [0.5, 3.0, 0.1], [0.2, 0.1, 2.5]])
    for nu in (3, 5, 12):
        expected = stats.wishart(df=nu, scale=spd3).logpdf(x)
        assert randmat.wishart_log_density(x, nu, spd3) == pytest.approx(expected, rel=1e-10)


def test_scalar_wishart_log_density():
    # m = 1, x = 2, nu = 3, scale = 1: -ln 2 - 1 - ln Gamma(3/2)
    value = randmat.wishart_log_density(np.array([[2.0]]), 3, np.array([[1.0]]))
    assert value == pytest.approx(-1.572364943, abs=1e-8)
    assert value == pytest.approx(stats.chi2(3).logpdf(2.0), rel=1e-12)


def test_wishart_log_density_errors(spd3):
    with pytest.raises(DomainError):
        randmat.wishart_log_density(np.eye(2), 4, spd3)
    with pytest.raises(DomainError):
        randmat.wishart_log_density(np.eye(3), 2, spd3)


@pytest.mark.parametrize('nu', range(1, 11))
def test_scalar_wishart_is_a_scaled_gamma(nu):
    for s in (0.5, 1.0, 3.0):
        expected = stats.gamma(a=nu / 2.0, scale=2.0 * s)
        for x in (0.1, 1.0, 5.0, 20.0):
            value = randmat.wishart_log_density(np.array([[x]]), nu, np.array([[s]]))
            assert value == pytest.approx(expected.logpdf(x), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize('nu', [2, 3, 5, 10])
def test_scalar_wishart_density_integrates_to_one(nu):
    def density(x):
        return np.exp(randmat.wishart_log_density(np.array([[x]]), nu, np.array([[1.0]])))
    total, _ = integrate.quad(density, 0.0, 200.0, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_sample_mvn_moments(spd3):
    rng = randmat.RngStream(77, 0)
    mean = np.array([1.0, -2.0, 0.5])
    n = 100000
    draws = np.array([randmat.sample_mvn(mean, spd3, rng) for _ in range(n)])
    standard_error = np.sqrt(np.diag(spd3) / n)
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 5.0 * standard_error)
    # Var(x_i x_j) = S_ii S_jj + S_ij^2 for a centred Gaussian pair
    cov_error = np.sqrt((np.outer(np.diag(spd3), np.diag(spd3)) + spd3 ** 2) / n)
    assert np.all(np.abs(np.cov(draws, rowvar=False) - spd3) < 5.0 * cov_error)
