"""
Gibbs samplers for the Normal-Wishart BVAR.

    alpha | y, Sigma^-1      ~ N(alpha_bar, V_bar)
    Sigma^-1 | y, alpha, nu  ~ W(nu + T_eff, S_bar^-1)
    nu | Sigma^-1            Metropolis-Hastings on the loss-based conditional (LossBased only)

with alpha = vec(A), V_bar = (V0^-1 + Sigma^-1 (x) X'X)^-1 and S_bar = S0 + E'E.
"""
from dataclasses import dataclass, field
from functools import cached_property
import logging

import numpy as np
from scipy import linalg

from errors import DomainError, NotPositiveDefiniteError, NumericalError, SamplerError
import lossprior
import randmat
import varcore

JITTER_ATTEMPTS = 3
HPD_MASS = 0.95


@dataclass(frozen=True)
class FixedNu:
    nu: int

    def label(self):
        return f'fixed:{self.nu}'


@dataclass(frozen=True)
class LossBasedNu:
    def label(self):
        return 'loss'


def parse_nu_scheme(text):
    """Parses 'loss' or 'fixed:<int>' into a nu scheme."""
    text = str(text).strip().lower()
    if text in ('loss', 'loss-based', 'lossbased'):
        return LossBasedNu()
    if text.startswith('fixed:'):
        try:
            return FixedNu(int(text.split(':', 1)[1]))
        except ValueError as e:
            raise DomainError(f'invalid fixed nu in {text!r}') from e
    raise DomainError(f"nu scheme must be 'loss' or 'fixed:<int>', got {text!r}")


@dataclass(frozen=True)
class NormalWishartPrior:
    """
    alpha ~ N(alpha0, V0) and Sigma^-1 ~ W(nu, S0^-1).

    V0 = None is the diffuse limit V0^-1 = 0.
    """
    alpha0: np.ndarray
    V0: np.ndarray
    S0: np.ndarray
    nu_scheme: object = field(default_factory=LossBasedNu)

    def __post_init__(self):
        alpha0 = np.asarray(self.alpha0, dtype=float).reshape(-1)
        S0 = np.atleast_2d(np.asarray(self.S0, dtype=float))
        randmat.cholesky_spd(S0, 'S0')
        object.__setattr__(self, 'alpha0', alpha0)
        object.__setattr__(self, 'S0', S0)
        if self.V0 is not None:
            V0 = np.atleast_2d(np.asarray(self.V0, dtype=float))
            if V0.shape != (alpha0.size, alpha0.size):
                raise DomainError(f'V0 {V0.shape} does not match alpha0 of length {alpha0.size}')
            randmat.cholesky_spd(V0, 'V0')
            object.__setattr__(self, 'V0', V0)
        if alpha0.size % S0.shape[0] != 0:
            raise DomainError(f'alpha0 length {alpha0.size} is not a multiple of m={S0.shape[0]}')
        if isinstance(self.nu_scheme, FixedNu) and self.nu_scheme.nu < self.m:
            raise DomainError(f'fixed nu={self.nu_scheme.nu} must be >= m={self.m}')

    @property
    def m(self):
        return self.S0.shape[0]

    @property
    def k(self):
        return self.alpha0.size // self.m

    @property
    def loss_based(self):
        return isinstance(self.nu_scheme, LossBasedNu)

    def initial_nu(self):
        return self.m + 1 if self.loss_based else self.nu_scheme.nu

    @cached_property
    def precision(self):
        """V0^-1 (zeros for the diffuse prior)."""
        if self.V0 is None:
            return np.zeros((self.alpha0.size, self.alpha0.size))
        return randmat.spd_inverse(self.V0)

    @cached_property
    def precision_mean(self):
        """V0^-1 alpha0."""
        return self.precision @ self.alpha0

    @classmethod
    def default(cls, m, k, nu_scheme=None, v0_scale=10.0, s0=None):
        """alpha0 = 0, V0 = v0_scale I, S0 = I_m (or the given S0)."""
        return cls(np.zeros(k * m), v0_scale * np.eye(k * m),
                   np.eye(m) if s0 is None else s0,
                   LossBasedNu() if nu_scheme is None else nu_scheme)

    @classmethod
    def diffuse(cls, m, k, nu_scheme=None, s0=None):
        return cls(np.zeros(k * m), None, np.eye(m) if s0 is None else s0,
                   LossBasedNu() if nu_scheme is None else nu_scheme)

    def with_scheme(self, nu_scheme):
        return NormalWishartPrior(self.alpha0, self.V0, self.S0, nu_scheme)


@dataclass(frozen=True)
class SamplerConfig:
    """
    Gibbs settings. The (seed, stream_id) pair names the RngStream every run starts
    from, so two runs with equal configs produce identical draws.
    """
    iterations: int = 6000
    burn_in: int = 1000
    thin: int = 1
    mh_step: int = 3
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if not self.iterations > self.burn_in >= 0:
            raise DomainError(f'need iterations > burn_in >= 0, got {self.iterations} and {self.burn_in}')
        if self.thin < 1:
            raise DomainError(f'thin must be >= 1, got {self.thin}')
        if self.mh_step < 1:
            raise DomainError(f'mh_step must be >= 1, got {self.mh_step}')

    @property
    def retained(self):
        return len(range(self.burn_in, self.iterations, self.thin))

    def rng(self):
        return randmat.RngStream(self.seed, self.stream_id)

    def with_stream(self, stream_id):
        return SamplerConfig(self.iterations, self.burn_in, self.thin, self.mh_step, self.seed, stream_id)


@dataclass
class PosteriorDraws:
    alpha_draws: np.ndarray
    sigma_draws: np.ndarray
    nu_draws: np.ndarray
    mh_acceptance_rate: float
    k: int
    m: int
    p: int = 1
    intercept: bool = False
    scheme: str = ''

    def __len__(self):
        return self.alpha_draws.shape[0]

    def coefficient_draw(self, index):
        return varcore.devectorize(self.alpha_draws[index], self.k, self.m)


def _cholesky_with_jitter(matrix, logger=None):
    """Cholesky factor, retrying with 1e-10 trace(matrix)/dim I added up to JITTER_ATTEMPTS times."""
    matrix = randmat.symmetrize(matrix)
    jitter = 1e-10 * max(np.trace(matrix) / matrix.shape[0], 1e-300)
    for attempt in range(JITTER_ATTEMPTS + 1):
        try:
            bump = 0.0 if attempt == 0 else jitter * 10.0 ** (attempt - 1)
            return linalg.cholesky(matrix + bump * np.eye(matrix.shape[0]), lower=True)
        except linalg.LinAlgError:
            if logger is not None:
                logger.warning(f'Cholesky failed, escalating jitter (attempt {attempt + 1})')
    raise NumericalError('posterior precision of alpha is not positive definite',
                         diagnostic=f'dim={matrix.shape[0]}, trace={np.trace(matrix):.6g}')


def alpha_posterior(design, sigma_inv, prior, logger=None):
    """
    Returns (alpha_bar, L) where L L' = V_bar^-1 = V0^-1 + Sigma^-1 (x) X'X.

    V0^-1 alpha0 + vec(X' Y Sigma^-1) equals V0^-1 alpha0 + sum_t Z_t' Sigma^-1 y_t with
    Z_t = I_m (x) x_t'.
    """
    XtX = design.X.T @ design.X
    precision = prior.precision + np.kron(sigma_inv, XtX)
    shift = prior.precision_mean + varcore.vectorize(design.X.T @ design.Y @ sigma_inv)
    factor = _cholesky_with_jitter(precision, logger)
    mean = linalg.cho_solve((factor, True), shift)
    return mean, factor


def draw_alpha(design, sigma_inv, prior, rng, logger=None):
    """
    One draw of alpha = vec(A) from N(alpha_bar, V_bar).

    Parameters:
    design (LagDesign): Responses and regressors.
    sigma_inv (array): Current precision matrix Sigma^-1.
    prior (NormalWishartPrior): Supplies alpha0 and V0.
    rng (RngStream): Random stream.

    Returns:
    array: Vector of length k m.

    Errors:
    NumericalError: Thrown when V_bar^-1 stays singular after jitter escalation.
    """
    mean, factor = alpha_posterior(design, sigma_inv, prior, logger)
    z = rng.standard_normal(mean.shape[0])
    # V_bar = L'^-1 L^-1, so mean + L'^-1 z has covariance V_bar
    return mean + linalg.solve_triangular(factor, z, lower=True, trans='T')


def sigma_posterior(design, alpha, prior, nu_current):
    """Returns (nu_bar, S_bar) = (nu + T_eff, S0 + E'E)."""
    A = varcore.devectorize(alpha, design.k, design.m)
    E = varcore.residuals(design, A)
    return int(nu_current) + design.T_eff, randmat.symmetrize(prior.S0 + E.T @ E)


def draw_sigma_inv(design, alpha, prior, nu_current, rng):
    """
    One draw of Sigma^-1 ~ W(nu_current + T_eff, S_bar^-1).

    Errors:
    DomainError: Thrown for nu_current < m.
    NumericalError: Thrown when S_bar is not positive definite.
    """
    if nu_current < design.m:
        raise DomainError(f'nu={nu_current} must be >= m={design.m}')
    nu_bar, S_bar = sigma_posterior(design, alpha, prior, nu_current)
    try:
        scale = randmat.spd_inverse(S_bar)
        return randmat.sample_wishart(nu_bar, scale, rng)
    except NotPositiveDefiniteError as e:
        raise NumericalError('S_bar is not positive definite', diagnostic=str(e)) from e


def propose_nu(nu_current, mh_step, rng):
    """Uniform on {nu - step, ..., nu - 1, nu + 1, ..., nu + step}."""
    offset = rng.integers(0, 2 * mh_step) - mh_step
    return nu_current + (offset if offset < 0 else offset + 1)


def metropolis_accept(log_ratio, u):
    return u < np.exp(min(0.0, log_ratio))


def draw_nu(nu_current, sigma_inv, prior, mh_step, rng, target=None):
    """
    One Metropolis-Hastings step for nu targeting pi(nu) W(Sigma^-1 | nu, S0^-1).

    The symmetric proposal needs no Hastings correction; proposals below m are rejected
    outright and counted as rejections.

    Parameters:
    nu_current (int): Current state, >= m.
    sigma_inv (array): Current precision matrix.
    prior (NormalWishartPrior): Supplies S0.
    mh_step (int): Maximum proposal distance.
    rng (RngStream): Random stream.
    target (lossprior.NuConditional): Optional prebuilt conditional for sigma_inv.

    Returns:
    tuple: (nu, accepted).
    """
    target = lossprior.NuConditional(sigma_inv, prior.S0) if target is None else target
    proposal = propose_nu(nu_current, mh_step, rng)
    if proposal < target.m:
        return nu_current, False
    u = rng.uniform()
    if metropolis_accept(target(proposal) - target(nu_current), u):
        return proposal, True
    return nu_current, False


def run_gibbs(design, prior, config, logger=None):
    """
    Runs the Gibbs sampler alpha -> Sigma^-1 -> (nu) for config.iterations sweeps.

    The chain starts at Sigma^-1 = I and nu = m + 1 (LossBased) or the fixed nu. Draws
    from sweeps burn_in, burn_in + thin, ... are retained; Sigma is stored, not its
    inverse.

    Parameters:
    design (LagDesign): The data.
    prior (NormalWishartPrior): Hyperparameters and nu scheme.
    config (SamplerConfig): Iterations, burn-in, thinning, MH step, random stream.
    logger (logging.Logger): Optional logger.

    Returns:
    PosteriorDraws: Retained draws; nu_draws is empty under a fixed nu.

    Errors:
    DomainError: Thrown when the prior and design disagree in dimension.
    SamplerError: Thrown on numerical breakdown, carrying the sweep index.
    """
    logger = logging.getLogger('lbvar') if logger is None else logger
    m, k = design.m, design.k
    if prior.m != m or prior.k != k:
        raise DomainError(f'prior is for (k={prior.k}, m={prior.m}) but design has (k={k}, m={m})')

    rng = config.rng()
    retained = config.retained
    alpha_draws = np.empty((retained, k * m))
    sigma_draws = np.empty((retained, m, m))
    nu_draws = np.empty(retained, dtype=int) if prior.loss_based else np.empty(0, dtype=int)
    table = lossprior.prior_table(m) if prior.loss_based else None

    sigma_inv = np.eye(m)
    nu = prior.initial_nu()
    accepted = 0
    kept = 0
    for sweep in range(config.iterations):
        try:
            alpha = draw_alpha(design, sigma_inv, prior, rng, logger)
            sigma_inv = draw_sigma_inv(design, alpha, prior, nu, rng)
            if prior.loss_based:
                target = lossprior.NuConditional(sigma_inv, prior.S0, table)
                nu, moved = draw_nu(nu, sigma_inv, prior, config.mh_step, rng, target)
                accepted += moved
        except (NumericalError, NotPositiveDefiniteError) as e:
            logger.error(f'Gibbs sampler failed at sweep {sweep}: {e}')
            raise SamplerError('Gibbs sampler failed', sweep, kept, e) from e

        if sweep >= config.burn_in and (sweep - config.burn_in) % config.thin == 0:
            alpha_draws[kept] = alpha
            sigma_draws[kept] = randmat.spd_inverse(sigma_inv)
            if prior.loss_based:
                nu_draws[kept] = nu
            kept += 1

    acceptance = accepted / config.iterations if prior.loss_based else 0.0
    if prior.loss_based:
        logger.debug(f'Gibbs run finished: {kept} draws, MH acceptance {acceptance:.3f}')
    return PosteriorDraws(alpha_draws, sigma_draws, nu_draws, acceptance, k, m,
                          design.p, design.intercept, prior.nu_scheme.label())


def discrete_hpd(values, mass=HPD_MASS):
    """
    Smallest set of integer values, taken by descending frequency (ties towards the
    smaller value), whose empirical mass reaches `mass`. Returns (set, low, high).
    """
    values = np.asarray(values, dtype=int)
    if values.size == 0:
        raise DomainError('cannot compute an HPD set from no draws')
    support, counts = np.unique(values, return_counts=True)
    order = sorted(range(support.size), key=lambda i: (-counts[i], support[i]))
    chosen, cumulative = [], 0
    for i in order:
        chosen.append(int(support[i]))
        cumulative += counts[i]
        if cumulative >= mass * values.size - 1e-9:
            break
    return sorted(chosen), min(chosen), max(chosen)


@dataclass
class PosteriorSummary:
    alpha_mean: np.ndarray
    A_mean: np.ndarray
    sigma_mean: np.ndarray
    draws: int
    scheme: str
    nu_mean: float = None
    nu_hpd_low: int = None
    nu_hpd_high: int = None
    mh_acceptance: float = None

    def to_dict(self):
        return {
            'scheme': self.scheme,
            'draws': self.draws,
            'A_mean': self.A_mean.tolist(),
            'sigma_mean': self.sigma_mean.tolist(),
            'nu_mean': self.nu_mean,
            'nu_hpd_low': self.nu_hpd_low,
            'nu_hpd_high': self.nu_hpd_high,
            'mh_acceptance': self.mh_acceptance,
        }


def summarize(draws):
    """
    Posterior means of alpha and Sigma; for nu, the mean and the 95% discrete HPD
    interval [min, max] of the HPD set.

    Errors:
    DomainError: Thrown for an empty draw set.
    """
    if len(draws) == 0:
        raise DomainError('cannot summarize an empty set of draws')
    alpha_mean = draws.alpha_draws.mean(axis=0)
    summary = PosteriorSummary(alpha_mean, varcore.devectorize(alpha_mean, draws.k, draws.m),
                               draws.sigma_draws.mean(axis=0), len(draws), draws.scheme)
    if draws.nu_draws.size:
        _, low, high = discrete_hpd(draws.nu_draws)
        summary.nu_mean = float(draws.nu_draws.mean())
        summary.nu_hpd_low, summary.nu_hpd_high = low, high
        summary.mh_acceptance = float(draws.mh_acceptance_rate)
    return summary
