"""
Monte Carlo comparison of the fixed (nu = m + 1) and loss-based nu schemes.

Each replication simulates one VAR(1) with Sigma ~ IW(nu_true, Psi), fits both priors
to the same data with the same sampler stream, and scores the posterior means of Sigma
and A by RMAD against the truth.
"""
from dataclasses import asdict, dataclass, field
import json
import logging

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from errors import DomainError, LbvarError
import inference
import randmat
import varcore

BOXPLOT_COLUMNS = ['m', 'T', 'nu_true', 'scheme', 'replication', 'rmad_sigma', 'rmad_coeffs']
MAX_RETRIES = 3
FULL_NU_TRUE = {5: (5, 10, 15), 10: (10, 15, 20), 20: (20, 24, 26)}


def rmad(estimate, truth):
    """
    Root of the mean absolute deviation, [mean |theta - theta_hat|]^(1/2).

    Errors:
    DomainError: Thrown when the shapes differ.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise DomainError(f'estimate {estimate.shape} and truth {truth.shape} differ in shape')
    if estimate.size == 0:
        raise DomainError('RMAD of an empty matrix')
    return float(np.sqrt(np.mean(np.abs(truth - estimate))))


@dataclass(frozen=True)
class StudyGrid:
    m_values: tuple = (5, 10, 20)
    T_values: tuple = (30, 100)
    nu_true_map: dict = field(default_factory=lambda: dict(FULL_NU_TRUE))
    replications: int = 250
    p: int = 1
    coeff_diagonal: float = 0.5

    def __post_init__(self):
        if self.replications < 1:
            raise DomainError('a study needs at least one replication')
        for m in self.m_values:
            if m not in self.nu_true_map:
                raise DomainError(f'no nu_true values for m={m}')
            if any(nu < m for nu in self.nu_true_map[m]):
                raise DomainError(f'nu_true values for m={m} must be >= m')
        for T in self.T_values:
            if T < self.p + 2:
                raise DomainError(f'T={T} is too short for lag order {self.p}')

    @classmethod
    def desk(cls, replications=50):
        """Desk-scale preset: m in {5, 10}, both T values."""
        return cls(m_values=(5, 10), replications=replications)

    def cells(self):
        for m in self.m_values:
            for T in self.T_values:
                for nu_true in self.nu_true_map[m]:
                    yield m, T, nu_true

    def to_dict(self):
        record = asdict(self)
        record['nu_true_map'] = {str(m): list(values) for m, values in self.nu_true_map.items()}
        return record


@dataclass(frozen=True)
class RmadSample:
    m: int
    T: int
    nu_true: int
    replication_id: int
    scheme: str
    rmad_sigma: float
    rmad_coeffs: float


def _fit_and_score(design, prior, config, truth):
    draws = inference.run_gibbs(design, prior, config, logging.getLogger('lbvar.worker'))
    summary = inference.summarize(draws)
    return rmad(summary.sigma_mean, truth.Sigma), rmad(summary.A_mean, truth.A)


def run_replication(m, T, nu_true, replication, grid, config):
    """
    One paired replication. Retries with a fresh sub-seed (up to MAX_RETRIES) when a
    sampler fails; returns (samples, attempts used).
    """
    last_error = None
    for attempt in range(MAX_RETRIES + 1):
        key = randmat.stream_key(config.seed, m, T, nu_true, replication, attempt)
        rng = randmat.RngStream(config.seed, key)
        scale = varcore.default_generation_scale(m, nu_true)
        coeffs = varcore.default_coefficients(m, grid.p, grid.coeff_diagonal)
        try:
            data, truth = varcore.simulate_var(m, T, grid.p, coeffs,
                                               varcore.InverseWishartSource(nu_true, scale), rng)
            design = varcore.build_lag_design(data, grid.p)
            # generator and prior share the scale, S0 = Psi
            prior = inference.NormalWishartPrior.default(m, design.k, s0=scale)
            fit_config = config.with_stream(randmat.stream_key(key, 'gibbs'))
            samples = []
            for scheme in (inference.FixedNu(m + 1), inference.LossBasedNu()):
                rmad_sigma, rmad_coeffs = _fit_and_score(design, prior.with_scheme(scheme), fit_config, truth)
                samples.append(RmadSample(m, T, nu_true, replication, _scheme_name(scheme), rmad_sigma, rmad_coeffs))
            return samples, attempt
        except LbvarError as e:
            last_error = e
    raise last_error


def _scheme_name(scheme):
    return 'loss-based' if isinstance(scheme, inference.LossBasedNu) else 'fixed'


def run_study(grid, config, n_jobs=1, logger=None):
    """
    Runs every (m, T, nu_true) cell of the grid for grid.replications paired replications.

    Parameters:
    grid (StudyGrid): Cells and replication count.
    config (SamplerConfig): Gibbs settings; config.seed is the master seed.
    n_jobs (int): Worker processes; results do not depend on it.
    logger (logging.Logger): Optional logger.

    Returns:
    list: RmadSamples ordered by cell, replication and scheme (fixed first).

    Errors:
    LbvarError: Re-raised when a replication still fails after MAX_RETRIES retries.
    """
    logger = logging.getLogger('lbvar') if logger is None else logger
    samples = []
    for m, T, nu_true in grid.cells():
        logger.info(f'Study cell m={m}, T={T}, nu_true={nu_true}: {grid.replications} replications')
        results = Parallel(n_jobs=n_jobs)(
            delayed(run_replication)(m, T, nu_true, replication, grid, config)
            for replication in range(grid.replications))
        for replication, (pair, attempts) in enumerate(results):
            if attempts:
                logger.warning(f'Replication {replication} of cell (m={m}, T={T}, nu_true={nu_true}) '
                               f'needed {attempts} re-draws')
            samples.extend(pair)
    return samples


def samples_frame(samples):
    return pd.DataFrame([[s.m, s.T, s.nu_true, s.scheme, s.replication_id, s.rmad_sigma, s.rmad_coeffs]
                         for s in samples], columns=BOXPLOT_COLUMNS)


def export_boxplot_data(samples, path):
    """
    Writes the long-format CSV m,T,nu_true,scheme,replication,rmad_sigma,rmad_coeffs.

    Errors:
    DomainError: Thrown for an empty sample list.
    OSError: Re-raised with the path in the message.
    """
    if not samples:
        raise DomainError('no RMAD samples to export')
    try:
        samples_frame(samples).to_csv(path, index=False, float_format='%.17g')
    except OSError as e:
        raise OSError(f'cannot write boxplot data to {path}: {e}') from e
    return path


def summarize_cells(samples):
    """Median RMAD of Sigma per cell and scheme, and the median advantage fixed - loss."""
    frame = samples_frame(samples)
    medians = frame.pivot_table(index=['m', 'T', 'nu_true'], columns='scheme',
                                values='rmad_sigma', aggfunc='median').reset_index()
    wide = frame.pivot_table(index=['m', 'T', 'nu_true', 'replication'], columns='scheme',
                             values='rmad_sigma').reset_index()
    wide['advantage'] = wide['fixed'] - wide['loss-based']
    advantage = wide.groupby(['m', 'T', 'nu_true'])['advantage'].median().reset_index()
    summary = medians.merge(advantage, on=['m', 'T', 'nu_true'])
    summary.columns.name = None
    return summary.rename(columns={'fixed': 'median_fixed', 'loss-based': 'median_loss',
                                   'advantage': 'median_advantage'})


def direction_of_effect(samples, allowed_inversions=1):
    """
    True when, within every (m, T), the median advantage is non-decreasing in nu_true
    up to `allowed_inversions` inversions.
    """
    summary = summarize_cells(samples)
    for _, group in summary.groupby(['m', 'T']):
        steps = np.diff(group.sort_values('nu_true')['median_advantage'].to_numpy())
        if np.sum(steps < 0.0) > allowed_inversions:
            return False
    return True


def study_manifest(grid, config, version):
    return {
        'grid': grid.to_dict(),
        'sampler': asdict(config),
        'master_seed': config.seed,
        'version': version,
        'coefficient_rmad_n': 'k * m (k = m p)',
        'generation': 'Sigma ~ IW(nu_true, Psi), Psi = (nu_true - m - 1) I or I when nu_true <= m + 1; S0 = Psi',
    }


def write_study_manifest(grid, config, version, path):
    with open(path, 'w') as outfile:
        json.dump(study_manifest(grid, config, version), outfile, indent=2)
    return path
