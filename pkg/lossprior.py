"""
Loss-based prior on the Wishart degrees of freedom.

The prior gives each integer nu >= m a mass of exp(KL(W_nu || W_nu+1)) - 1, the
divergence to the nearest alternative (c = +1 always wins over c = -1). The prior is
not summable; only the conditional posterior p(nu | Sigma^-1) is proper, so every
enumeration here reports how much mass lies beyond its truncation point.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from errors import DomainError
import randmat
import special

DEFAULT_NU_SPAN = 2000


def _check_dimension(m):
    if int(m) != m or m < 1:
        raise DomainError(f'dimension must be a positive integer, got {m!r}')
    return int(m)


def _check_nu(m, nu):
    nu_values = np.asarray(nu)
    if np.any(nu_values != np.round(nu_values)):
        raise DomainError(f'degrees of freedom must be integers, got {nu!r}')
    if np.any(nu_values < m):
        raise DomainError(f'degrees of freedom must be >= m={m}, got {nu!r}')
    return nu_values.astype(float)


def kl_wishart(m, nu, c):
    """
    Returns KL(W_nu || W_nu+c) for two Wisharts sharing their scale matrix.

    KL = ln Gamma_m((nu+c)/2) - ln Gamma_m(nu/2) - (c/2) psi_m(nu/2)

    For c = +1 and c = -1 the Gamma_m ratio telescopes to a single ratio of scalar
    Gamma functions, which is what the prior evaluates on its hot path.

    Parameters:
    m (int): Matrix dimension, m >= 1.
    nu (int): Degrees of freedom of the reference Wishart, nu >= m.
    c (int): Integer offset; nu + c must exceed m - 1.

    Returns:
    float: The divergence, >= 0 and zero only at c = 0.

    Errors:
    DomainError: Thrown when either density does not exist.
    """
    m = _check_dimension(m)
    if int(c) != c:
        raise DomainError(f'offset c must be an integer, got {c!r}')
    c = int(c)
    nu = float(_check_nu(m, nu))
    if nu + c <= m - 1:
        raise DomainError(f'W_(nu+c) does not exist for m={m}, nu={nu:g}, c={c}')
    if c == 0:
        return 0.0
    if c == 1:
        log_ratio = special.log_gamma(0.5 * (nu + 1)) - special.log_gamma(0.5 * (nu + 1 - m))
    elif c == -1:
        log_ratio = special.log_gamma(0.5 * (nu - m)) - special.log_gamma(0.5 * nu)
    else:
        log_ratio = special.multivariate_log_gamma(m, 0.5 * (nu + c)) - special.multivariate_log_gamma(m, 0.5 * nu)
    return float(log_ratio - 0.5 * c * special.multivariate_digamma(m, 0.5 * nu))


def _kl_nearest(m, nu):
    """KL(W_nu || W_nu+1), vectorised over nu."""
    nu = np.asarray(nu, dtype=float)
    return (special.log_gamma(0.5 * (nu + 1)) - special.log_gamma(0.5 * (nu + 1 - m))
            - 0.5 * special.multivariate_digamma(m, 0.5 * nu))


def log_prior_nu(m, nu):
    """
    Returns the log of the unnormalised loss-based prior weight of nu.

    pi(nu) = Gamma((nu+1)/2) / Gamma((nu+1-m)/2) * exp(-psi_m(nu/2)/2) - 1
           = expm1(KL(W_nu || W_nu+1))

    expm1 keeps the weight accurate as the divergence shrinks towards zero for large nu.
    Accepts a scalar nu or an integer array.

    Errors:
    DomainError: Thrown for nu < m.
    """
    m = _check_dimension(m)
    nu_values = _check_nu(m, nu)
    result = np.log(np.expm1(_kl_nearest(m, nu_values)))
    return float(result) if np.ndim(nu) == 0 else result


@dataclass(frozen=True)
class NuSupport:
    m: int
    nu_max: int = None

    def __post_init__(self):
        _check_dimension(self.m)
        if self.nu_max is None:
            object.__setattr__(self, 'nu_max', self.m + DEFAULT_NU_SPAN)
        if self.nu_max < self.nu_min:
            raise DomainError(f'nu_max={self.nu_max} below nu_min={self.nu_min}')

    @property
    def nu_min(self):
        return self.m

    def values(self):
        return np.arange(self.nu_min, self.nu_max + 1)


class PriorWeightTable:
    """
    Read-only cache of log prior weights for nu in [m, nu_max].

    Lookups outside the cached range are computed on the fly and not stored, so one
    table can be shared between samplers.
    """

    def __init__(self, m, nu_max=None):
        self.support = NuSupport(m, nu_max)
        self.m = self.support.m
        values = self.support.values()
        weights = log_prior_nu(self.m, values)
        if not np.all(np.isfinite(weights)):
            raise DomainError(f'non-finite prior weight for m={self.m}')
        if np.any(np.diff(weights) >= 0.0):
            raise DomainError(f'prior weights are not strictly decreasing for m={self.m}')
        self._log_weights = dict(zip(values.tolist(), weights.tolist()))

    @property
    def nu_range(self):
        return self.support.nu_min, self.support.nu_max

    def log_weight(self, nu):
        cached = self._log_weights.get(int(nu))
        return cached if cached is not None else log_prior_nu(self.m, int(nu))

    def log_weights(self, nu_values):
        return np.array([self.log_weight(nu) for nu in nu_values])


@lru_cache(maxsize=None)
def _shared_table(m):
    return PriorWeightTable(m, m + 200)


def prior_table(m):
    """Returns the process-wide prior table for dimension m."""
    return _shared_table(_check_dimension(m))


@lru_cache(maxsize=65536)
def _log_wishart_normaliser(m, nu):
    # nu m/2 ln 2 + ln Gamma_m(nu/2)
    return 0.5 * nu * m * randmat.LOG_TWO + special.multivariate_log_gamma(m, 0.5 * nu)


class NuConditional:
    """
    The unnormalised log conditional posterior of nu given one precision matrix,

        ln p(nu | Sigma^-1) = ln pi(nu) + ln W(Sigma^-1 | nu, S0^-1) + const,

    with the nu-free pieces of the Wishart density (log determinants, trace) computed
    once. Evaluations are memoised per nu.
    """

    def __init__(self, precision, s0, table=None):
        precision_factor = randmat.cholesky_spd(precision, 'precision')
        s0_factor = randmat.cholesky_spd(s0, 'S0')
        self.m = precision_factor.shape[0]
        if s0_factor.shape[0] != self.m:
            raise DomainError(f'precision is {self.m}x{self.m} but S0 is {s0_factor.shape[0]}x{s0_factor.shape[0]}')
        self.table = prior_table(self.m) if table is None else table
        if self.table.m != self.m:
            raise DomainError(f'prior table is for m={self.table.m}, precision has m={self.m}')
        self.log_det_precision = randmat.log_det_spd(precision, precision_factor)
        # scale V = S0^-1, so ln|V| = -ln|S0| and tr(V^-1 X) = tr(S0 X)
        self.log_det_s0 = randmat.log_det_spd(s0, s0_factor)
        self.trace = float(np.sum(np.asarray(s0) * np.asarray(precision)))
        self._cache = {}

    def log_likelihood(self, nu):
        m = self.m
        return (0.5 * (nu - m - 1) * self.log_det_precision - 0.5 * self.trace
                + 0.5 * nu * self.log_det_s0 - _log_wishart_normaliser(m, nu))

    def __call__(self, nu):
        nu = int(nu)
        value = self._cache.get(nu)
        if value is None:
            if nu < self.m:
                raise DomainError(f'degrees of freedom must be >= m={self.m}, got {nu}')
            value = self.table.log_weight(nu) + self.log_likelihood(nu)
            self._cache[nu] = value
        return value


def log_conditional_posterior_nu(nu, precision, s0, table=None):
    """
    Returns ln pi(nu) + ln W(precision | nu, S0^-1), unnormalised.

    Parameters:
    nu (int): Degrees of freedom, nu >= m.
    precision (array): The observed precision matrix Sigma^-1 (m x m, SPD).
    s0 (array): The scale S0 (m x m, SPD); the Wishart scale is its inverse.
    table (PriorWeightTable): Optional shared prior cache.

    Errors:
    DomainError: Propagated from the prior and the Wishart density.
    """
    precision = np.atleast_2d(np.asarray(precision, dtype=float))
    m = precision.shape[0]
    _check_nu(m, nu)
    log_prior = (table if table is not None else prior_table(m)).log_weight(nu)
    return log_prior + randmat.wishart_log_density(precision, int(nu), randmat.spd_inverse(s0))


@dataclass
class NuPosterior:
    nu_values: np.ndarray
    probabilities: np.ndarray
    log_normaliser: float
    tail_mass: float

    @property
    def mode(self):
        return int(self.nu_values[np.argmax(self.probabilities)])

    @property
    def mean(self):
        return float(np.sum(self.nu_values * self.probabilities))


def _log_posterior_terms(conditional, nu_values):
    m = conditional.m
    log_prior = log_prior_nu(m, nu_values)
    nu = nu_values.astype(float)
    log_normaliser = 0.5 * nu * m * randmat.LOG_TWO + special.multivariate_log_gamma(m, 0.5 * nu)
    return (log_prior + 0.5 * (nu - m - 1) * conditional.log_det_precision - 0.5 * conditional.trace
            + 0.5 * nu * conditional.log_det_s0 - log_normaliser)


def enumerate_posterior_nu(precision, s0, nu_max=None, tail_span=DEFAULT_NU_SPAN):
    """
    Enumerates and normalises p(nu | precision) on {m, ..., nu_max}.

    The normaliser is taken over {m, ..., nu_max + tail_span}; `tail_mass` is the share
    of that total lying beyond nu_max.
    """
    conditional = NuConditional(precision, s0)
    m = conditional.m
    support = NuSupport(m, nu_max)
    extended = np.arange(m, support.nu_max + tail_span + 1)
    log_terms = _log_posterior_terms(conditional, extended)
    log_total = float(logsumexp(log_terms))
    kept = extended <= support.nu_max
    tail = float(np.exp(logsumexp(log_terms[~kept]) - log_total)) if np.any(~kept) else 0.0
    probabilities = np.exp(log_terms[kept] - log_total)
    probabilities = probabilities / probabilities.sum()
    return NuPosterior(extended[kept], probabilities, log_total, tail)


def log_ratio_sequence(m, precision, s0, nu_max):
    """
    Returns (nu, ln R_nu) for nu in [m, nu_max - 1], where R_nu is the ratio of
    successive Wishart likelihood terms,

        R_nu = |Sigma^-1|^(1/2) Gamma((nu+1-m)/2) / (2^(m/2) |S0^-1|^(1/2) Gamma((nu+1)/2)).
    """
    nu = np.arange(m, nu_max).astype(float)
    log_det_precision = randmat.log_det_spd(precision)
    log_det_s0 = randmat.log_det_spd(s0)
    log_ratio = (0.5 * log_det_precision + 0.5 * log_det_s0 - 0.5 * m * randmat.LOG_TWO
                 + special.log_gamma(0.5 * (nu + 1 - m)) - special.log_gamma(0.5 * (nu + 1)))
    return nu.astype(int), log_ratio


@dataclass
class ProperDiagnostic:
    m: int
    nu_max: int
    nu_values: np.ndarray
    log_ratios: np.ndarray
    strictly_decreasing: bool
    tail_mass: float
    normaliser_relative_change: float

    @property
    def proper(self):
        return self.strictly_decreasing and self.tail_mass < 1e-12

    def to_dict(self):
        return {
            'm': self.m,
            'nu_max': self.nu_max,
            'strictly_decreasing': bool(self.strictly_decreasing),
            'final_log_ratio': float(self.log_ratios[-1]),
            'tail_mass': self.tail_mass,
            'normaliser_relative_change': self.normaliser_relative_change,
            'proper': bool(self.proper),
        }


def properness_diagnostic(m, precision, s0, nu_max, extension=100):
    """
    Numerically checks that p(nu | precision) is summable.

    Parameters:
    m (int): Dimension of precision and s0.
    precision (array): Sigma^-1.
    s0 (array): S0.
    nu_max (int): Truncation point, must exceed m + 10.
    extension (int): Extra terms used for the normaliser convergence check.

    Returns:
    ProperDiagnostic: The log ratio sequence ln R_nu (which must decrease towards -inf),
            the posterior mass beyond nu_max, and the relative change of the
            normalising constant between nu_max and nu_max + extension.

    Errors:
    DomainError: Thrown when nu_max <= m + 10 or the inputs have the wrong shape.
    """
    m = _check_dimension(m)
    if nu_max <= m + 10:
        raise DomainError(f'nu_max must exceed m + 10 = {m + 10}, got {nu_max}')
    precision = np.atleast_2d(np.asarray(precision, dtype=float))
    if precision.shape != (m, m):
        raise DomainError(f'precision must be {m}x{m}, got {precision.shape}')

    nu_values, log_ratios = log_ratio_sequence(m, precision, s0, nu_max)
    posterior = enumerate_posterior_nu(precision, s0, nu_max)

    conditional = NuConditional(precision, s0)
    log_terms = _log_posterior_terms(conditional, np.arange(m, nu_max + extension + 1))
    log_partial = float(logsumexp(log_terms[:nu_max - m + 1]))
    log_extended = float(logsumexp(log_terms))
    relative_change = float(-np.expm1(log_partial - log_extended))

    return ProperDiagnostic(m, nu_max, nu_values, log_ratios,
                            bool(np.all(np.diff(log_ratios) < 0.0)),
                            posterior.tail_mass, relative_change)


@dataclass
class KlArgminReport:
    """Brute-force check that argmin over c != 0 of KL(W_nu || W_nu+c) is c = 1."""
    rows: list = field(default_factory=list)

    @property
    def passed(self):
        return bool(self.rows) and all(row['argmin'] == 1 for row in self.rows)

    @property
    def worst_margin(self):
        margins = [row['margin'] for row in self.rows if row['margin'] is not None]
        return min(margins) if margins else None

    @property
    def failures(self):
        return [row for row in self.rows if row['argmin'] != 1]

    def to_dict(self):
        return {
            'status': 'PASS' if self.passed else 'FAIL',
            'grid_points': len(self.rows),
            'worst_margin': self.worst_margin,
            'failures': len(self.failures),
            'grid': self.rows,
        }


def verify_kl_argmin(m_range, nu_offset_range, c_range):
    """
    Evaluates KL(W_nu || W_nu+c) over a grid and records the minimising offset.

    Parameters:
    m_range (iterable of int): Dimensions, each >= 2.
    nu_offset_range (iterable of int): k values with nu = m + k, each >= 1.
    c_range (iterable of int): Candidate offsets; 0 and offsets for which W_nu+c does not
                exist are skipped.

    Returns:
    KlArgminReport: One row per (m, nu) with the argmin and the margin
            KL(c=-1) - KL(c=+1); PASS iff the argmin is 1 everywhere.

    Errors:
    DomainError: Thrown for empty ranges or m < 2, k < 1.
    """
    m_values, offsets, candidates = list(m_range), list(nu_offset_range), [c for c in c_range if c != 0]
    if not m_values or not offsets or not candidates:
        raise DomainError('verify_kl_argmin needs non-empty m, nu offset and c ranges')
    if min(m_values) < 2 or min(offsets) < 1:
        raise DomainError('the grid must satisfy nu > m >= 2')

    report = KlArgminReport()
    for m in m_values:
        for k in offsets:
            nu = m + k
            admissible = [c for c in candidates if nu + c > m - 1]
            if not admissible:
                continue
            divergences = {c: kl_wishart(m, nu, c) for c in admissible}
            argmin = min(admissible, key=lambda c: (divergences[c], abs(c)))
            margin = kl_wishart(m, nu, -1) - kl_wishart(m, nu, 1)
            report.rows.append({'m': m, 'nu': nu, 'argmin': argmin,
                                'kl_min': divergences[argmin], 'margin': margin})
    return report
