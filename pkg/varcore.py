"""
VAR(p) data model.

    y_t = A_1 y_t-1 + ... + A_p y_t-p + e_t,    e_t ~ N(0, Sigma)

stacked as Y = X A + E with x_t = (y'_t-1, ..., y'_t-p) (a leading 1 when an intercept
is enabled). A is k x m, so its j-th block of m rows is A_j transposed.
"""
from dataclasses import dataclass, field

import numpy as np

from errors import DomainError, RejectedConfigurationError
import randmat

WARMUP = 100


@dataclass(frozen=True)
class VarDataset:
    observations: np.ndarray
    variable_names: list = None
    frequency: str = ''
    time_labels: list = None

    def __post_init__(self):
        observations = np.atleast_2d(np.asarray(self.observations, dtype=float))
        if observations.ndim != 2:
            raise DomainError(f'observations must be a T x m matrix, got shape {observations.shape}')
        if not np.all(np.isfinite(observations)):
            raise DomainError('observations contain non-finite entries')
        object.__setattr__(self, 'observations', observations)
        names = self.variable_names
        if names is None:
            names = [f'y{i + 1}' for i in range(observations.shape[1])]
        if len(names) != observations.shape[1]:
            raise DomainError(f'{len(names)} variable names for {observations.shape[1]} columns')
        object.__setattr__(self, 'variable_names', list(names))
        if self.time_labels is not None and len(self.time_labels) != observations.shape[0]:
            raise DomainError(f'{len(self.time_labels)} time labels for {observations.shape[0]} rows')

    @property
    def T(self):
        return self.observations.shape[0]

    @property
    def m(self):
        return self.observations.shape[1]

    def window(self, start, stop):
        """Rows [start, stop) as a new dataset."""
        labels = None if self.time_labels is None else list(self.time_labels[start:stop])
        return VarDataset(self.observations[start:stop], self.variable_names, self.frequency, labels)

    def select(self, columns):
        """Keeps the named (or indexed) variables, in the order given."""
        indices = []
        for column in columns:
            if isinstance(column, str):
                if column not in self.variable_names:
                    raise DomainError(f'unknown variable {column!r}; have {self.variable_names}')
                indices.append(self.variable_names.index(column))
            else:
                indices.append(int(column))
        return VarDataset(self.observations[:, indices], [self.variable_names[i] for i in indices],
                          self.frequency, self.time_labels)


@dataclass(frozen=True)
class LagDesign:
    p: int
    Y: np.ndarray
    X: np.ndarray
    intercept: bool = False

    @property
    def k(self):
        return self.X.shape[1]

    @property
    def m(self):
        return self.Y.shape[1]

    @property
    def T_eff(self):
        return self.Y.shape[0]


@dataclass(frozen=True)
class VarParameters:
    A: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        Sigma = np.atleast_2d(np.asarray(self.Sigma, dtype=float))
        if Sigma.shape != (A.shape[1], A.shape[1]):
            raise DomainError(f'Sigma {Sigma.shape} does not match A with {A.shape[1]} columns')
        randmat.cholesky_spd(Sigma, 'Sigma')
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'Sigma', Sigma)


def regressor_row(lags, intercept=False):
    """
    Builds x' from the p most recent observations.

    `lags` holds the rows y_t-1, ..., y_t-p in that order (most recent first).
    """
    row = np.asarray(lags, dtype=float).reshape(-1)
    return np.concatenate(([1.0], row)) if intercept else row


def build_lag_design(data, p, intercept=False):
    """
    Stacks Y_eff = (y_p+1, ..., y_T)' and X = (x_p+1, ..., x_T)'.

    Parameters:
    data (VarDataset): T x m observations.
    p (int): Lag order, p >= 1.
    intercept (bool): Prepend a column of ones to X.

    Returns:
    LagDesign: T - p rows; X has k = m p (+1) columns ordered lag 1 first.

    Errors:
    DomainError: Thrown for p < 1 or T < p + 2.
    """
    if int(p) != p or p < 1:
        raise DomainError(f'lag order must be a positive integer, got {p!r}')
    p = int(p)
    observations = data.observations
    T = observations.shape[0]
    if T < p + 2:
        raise DomainError(f'need at least p + 2 = {p + 2} observations for lag order {p}, have {T}')
    Y = observations[p:]
    blocks = [observations[p - j:T - j] for j in range(1, p + 1)]
    if intercept:
        blocks.insert(0, np.ones((T - p, 1)))
    return LagDesign(p, Y, np.hstack(blocks), bool(intercept))


def vectorize(A):
    """Column-major vec: entry (i, j) of a k x m matrix lands at position j k + i."""
    return np.asarray(A, dtype=float).reshape(-1, order='F')


def devectorize(alpha, k, m):
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size != k * m:
        raise DomainError(f'vector of length {alpha.size} cannot be reshaped to {k}x{m}')
    return alpha.reshape((k, m), order='F')


def residuals(design, params):
    """Returns Y_eff - X A."""
    A = params.A if isinstance(params, VarParameters) else np.asarray(params, dtype=float)
    if A.shape != (design.k, design.m):
        raise DomainError(f'coefficients {A.shape} do not match design ({design.k}, {design.m})')
    return design.Y - design.X @ A


def ols(design):
    """Least-squares coefficients (X'X)^-1 X'Y."""
    A, *_ = np.linalg.lstsq(design.X, design.Y, rcond=None)
    return A


def stack_coefficients(coeffs, intercept=None):
    """Turns [A_1, ..., A_p] (each m x m) into the k x m matrix A of Y = X A."""
    blocks = [np.asarray(block, dtype=float).T for block in coeffs]
    if intercept is not None:
        blocks.insert(0, np.asarray(intercept, dtype=float).reshape(1, -1))
    return np.vstack(blocks)


def companion_matrix(coeffs):
    coeffs = [np.asarray(block, dtype=float) for block in coeffs]
    m, p = coeffs[0].shape[0], len(coeffs)
    companion = np.zeros((m * p, m * p))
    companion[:m] = np.hstack(coeffs)
    if p > 1:
        companion[m:, :-m] = np.eye(m * (p - 1))
    return companion


def spectral_radius(coeffs):
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(coeffs)))))


def is_stationary(coeffs):
    return spectral_radius(coeffs) < 1.0


@dataclass(frozen=True)
class InverseWishartSource:
    """
    Sigma ~ IW(nu_true, scale). When scale is omitted it is (nu_true - m - 1) I so that
    E[Sigma] = I, falling back to I when that mean does not exist (nu_true <= m + 1).
    """
    nu_true: int
    scale: np.ndarray = None

    def resolve_scale(self, m):
        if self.scale is not None:
            return np.asarray(self.scale, dtype=float)
        return default_generation_scale(m, self.nu_true)

    def draw(self, m, rng):
        return randmat.sample_inverse_wishart(self.nu_true, self.resolve_scale(m), rng)


def default_generation_scale(m, nu_true):
    factor = nu_true - m - 1
    return (factor if factor > 0 else 1.0) * np.eye(m)


def default_coefficients(m, p, diagonal=0.5):
    """A_1 = diagonal I, A_2 = ... = A_p = 0."""
    coeffs = [np.zeros((m, m)) for _ in range(p)]
    coeffs[0] = diagonal * np.eye(m)
    return coeffs


def simulate_var(m, T, p, coeffs, sigma_source, rng, warmup=WARMUP, intercept=None):
    """
    Simulates T observations of a stationary VAR(p) after a discarded warm-up.

    Parameters:
    m (int): Number of variables.
    T (int): Number of retained observations.
    p (int): Lag order; coeffs must hold p matrices of shape m x m.
    coeffs (list): [A_1, ..., A_p].
    sigma_source (array | InverseWishartSource): Explicit Sigma, or the inverse-Wishart
                law it is drawn from.
    rng (RngStream): Random stream; Sigma is drawn first, then the innovations.
    warmup (int): Steps simulated from zero initial conditions and discarded.
    intercept (array): Optional constant term of length m.

    Returns:
    tuple: (VarDataset, VarParameters) where VarParameters holds the stacked k x m
           coefficient matrix and the Sigma that generated the data.

    Errors:
    RejectedConfigurationError: Thrown when the companion matrix has spectral radius >= 1.
    DomainError: Thrown for inconsistent shapes.
    """
    coeffs = [np.asarray(block, dtype=float) for block in coeffs]
    if len(coeffs) != p or any(block.shape != (m, m) for block in coeffs):
        raise DomainError(f'expected {p} coefficient matrices of shape {m}x{m}')
    if not is_stationary(coeffs):
        raise RejectedConfigurationError(f'companion spectral radius {spectral_radius(coeffs):.4f} >= 1, '
                                         'the VAR is explosive')

    if isinstance(sigma_source, InverseWishartSource):
        Sigma = sigma_source.draw(m, rng)
    else:
        Sigma = randmat.symmetrize(sigma_source)
    factor = randmat.cholesky_spd(Sigma, 'Sigma')
    constant = np.zeros(m) if intercept is None else np.asarray(intercept, dtype=float)

    total = warmup + T
    shocks = rng.standard_normal((total, m)) @ factor.T
    path = np.zeros((total + p, m))
    for t in range(p, total + p):
        path[t] = constant + shocks[t - p]
        for j, block in enumerate(coeffs, start=1):
            path[t] += block @ path[t - j]

    data = VarDataset(path[p + warmup:])
    params = VarParameters(stack_coefficients(coeffs, intercept), Sigma)
    return data, params
