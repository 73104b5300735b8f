"""
Random matrices for the Normal-Wishart model: reproducible streams, SPD helpers,
multivariate normal, Wishart and inverse-Wishart draws, and the Wishart log-density.
"""
import hashlib

import numpy as np
from scipy import linalg

from errors import DomainError, NotPositiveDefiniteError
import special

LOG_TWO = 0.69314718055994530942
UINT64_MASK = (1 << 64) - 1


class RngStream:
    """
    A reproducible random stream identified by a (seed, stream_id) pair.

    Identical pairs replay identical sequences on every platform; distinct stream ids
    give statistically independent streams (numpy SeedSequence spawn keys feeding
    PCG64). A stream is owned by one task at a time; parallel work uses distinct ids.
    """

    def __init__(self, seed=0, stream_id=0):
        self.seed = int(seed) & UINT64_MASK
        self.stream_id = int(stream_id) & UINT64_MASK
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def __repr__(self):
        return f'RngStream(seed={self.seed}, stream_id={self.stream_id})'

    def substream(self, *key):
        """Returns an independent stream under the same seed, keyed by `key`."""
        return RngStream(self.seed, stream_key(self.stream_id, *key))

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self):
        return float(self.generator.random())

    def integers(self, low, high):
        """Uniform integer in [low, high)."""
        return int(self.generator.integers(low, high))

    def chisquare(self, df):
        # chi^2_k = 2 * Gamma(k/2, 1)
        return 2.0 * self.generator.standard_gamma(np.asarray(df, dtype=float) / 2.0)


def stream_key(*parts):
    """Hashes a tuple of integers / strings into a 64-bit stream id."""
    text = '|'.join(str(part) for part in parts).encode('utf-8')
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), 'little')


def symmetrize(matrix):
    matrix = np.asarray(matrix, dtype=float)
    return 0.5 * (matrix + matrix.T)


def cholesky_spd(matrix, name='matrix'):
    """
    Returns the lower Cholesky factor of a symmetric positive definite matrix.

    Errors:
    DomainError: Thrown when the matrix is not square or not symmetric to 1e-10
                relative tolerance.
    NotPositiveDefiniteError: Thrown when the factorisation fails.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DomainError(f'{name} must be square, got shape {matrix.shape}')
    if not np.all(np.isfinite(matrix)):
        raise NotPositiveDefiniteError(f'{name} has non-finite entries')
    scale = max(np.max(np.abs(matrix)), 1.0)
    if np.max(np.abs(matrix - matrix.T)) > 1e-10 * scale:
        raise DomainError(f'{name} is not symmetric')
    try:
        return linalg.cholesky(symmetrize(matrix), lower=True)
    except linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(f'{name} is not positive definite: {e}') from e


def log_det_spd(matrix, factor=None):
    factor = cholesky_spd(matrix) if factor is None else factor
    return 2.0 * float(np.sum(np.log(np.diag(factor))))


def spd_inverse(matrix, factor=None):
    factor = cholesky_spd(matrix) if factor is None else factor
    identity = np.eye(factor.shape[0])
    inverse = linalg.cho_solve((factor, True), identity)
    return symmetrize(inverse)


def sample_mvn(mean, cov, rng, z=None):
    """
    Draws from N(mean, cov) as mean + L z with L = chol(cov).

    Parameters:
    mean (array): Mean vector of length d.
    cov (array): d x d SPD covariance.
    rng (RngStream): Source of the standard normal vector z.
    z (array): Optional fixed standard normal vector; when given, rng is not used.

    Returns:
    array: One draw of length d.

    Errors:
    DomainError: Thrown when mean and cov disagree in dimension.
    NotPositiveDefiniteError: Thrown when cov fails its Cholesky factorisation.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    factor = cholesky_spd(cov, 'covariance')
    if factor.shape[0] != mean.shape[0]:
        raise DomainError(f'mean has length {mean.shape[0]} but covariance is {factor.shape[0]}x{factor.shape[0]}')
    z = rng.standard_normal(mean.shape[0]) if z is None else np.asarray(z, dtype=float)
    return mean + factor @ z


def _check_integer_dof(nu, dim):
    if int(nu) != nu:
        raise DomainError(f'degrees of freedom must be an integer, got {nu!r}')
    if nu < dim:
        raise DomainError(f'degrees of freedom {nu} below dimension {dim}')
    return int(nu)


def bartlett_factor(nu, dim, rng):
    """Lower-triangular A with A[i, i]^2 ~ chi^2(nu - i) and N(0, 1) below the diagonal."""
    factor = np.zeros((dim, dim))
    factor[np.diag_indices(dim)] = np.sqrt(rng.chisquare(nu - np.arange(dim)))
    rows, cols = np.tril_indices(dim, -1)
    factor[rows, cols] = rng.standard_normal(rows.shape[0])
    return factor


def sample_wishart(nu, scale, rng, scale_factor=None):
    """
    Draws X ~ W(nu, scale) by the Bartlett decomposition X = L A A' L'.

    Parameters:
    nu (int): Degrees of freedom, nu >= dim.
    scale (array): dim x dim SPD scale matrix (E[X] = nu * scale).
    rng (RngStream): Random stream.
    scale_factor (array): Optional precomputed lower Cholesky factor of scale.

    Returns:
    array: A symmetric positive definite dim x dim draw.

    Errors:
    DomainError: Thrown for nu < dim or a non-integer nu.
    NotPositiveDefiniteError: Thrown when scale is not SPD.
    """
    factor = cholesky_spd(scale, 'Wishart scale') if scale_factor is None else scale_factor
    dim = factor.shape[0]
    nu = _check_integer_dof(nu, dim)
    root = factor @ bartlett_factor(nu, dim, rng)
    return symmetrize(root @ root.T)


def sample_inverse_wishart(nu, scale, rng):
    """Draws Sigma ~ IW(nu, scale), i.e. Sigma^-1 ~ W(nu, scale^-1)."""
    precision = sample_wishart(nu, spd_inverse(scale), rng)
    return spd_inverse(precision)


def wishart_log_density(x, nu, scale):
    """
    Returns ln W(x | scale, nu).

    ln W = (nu-m-1)/2 ln|x| - tr(scale^-1 x)/2 - nu m/2 ln 2 - nu/2 ln|scale| - ln Gamma_m(nu/2)

    Errors:
    DomainError: Thrown for dimension mismatches, nu < m, or non-SPD inputs.
    """
    x_factor = cholesky_spd(x, 'x')
    scale_factor = cholesky_spd(scale, 'Wishart scale')
    m = x_factor.shape[0]
    if scale_factor.shape[0] != m:
        raise DomainError(f'x is {m}x{m} but scale is {scale_factor.shape[0]}x{scale_factor.shape[0]}')
    nu = _check_integer_dof(nu, m)

    log_det_x = log_det_spd(x, x_factor)
    log_det_scale = log_det_spd(scale, scale_factor)
    # tr(V^-1 X) = ||L_V^-1 L_X||_F^2
    whitened = linalg.solve_triangular(scale_factor, x_factor, lower=True)
    trace = float(np.sum(whitened * whitened))
    return (0.5 * (nu - m - 1) * log_det_x - 0.5 * trace - 0.5 * nu * m * LOG_TWO
            - 0.5 * nu * log_det_scale - special.multivariate_log_gamma(m, 0.5 * nu))
