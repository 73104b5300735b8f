"""
One-step-ahead predictive simulation and scoring.

Every window [t-R+1, t] is refitted from scratch, the posterior predictive of y_t+1 is
sampled by composition (one predictive draw per retained posterior draw) and scored
against the realised value by RMSE of the predictive mean and by CRPS.
"""
from dataclasses import dataclass, field
import logging

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from errors import DomainError, LbvarError
import inference
import randmat
import varcore


@dataclass
class ForecastRecord:
    window_index: int
    origin_time: int
    predictive_draws: np.ndarray
    realized: np.ndarray
    nu_mean: float = None
    nu_hpd_low: int = None
    nu_hpd_high: int = None
    point_forecast: np.ndarray = field(init=False)

    def __post_init__(self):
        self.predictive_draws = np.atleast_2d(np.asarray(self.predictive_draws, dtype=float))
        self.realized = np.atleast_1d(np.asarray(self.realized, dtype=float))
        if self.predictive_draws.shape[0] < 2:
            raise DomainError('a forecast record needs at least two predictive draws')
        if not np.all(np.isfinite(self.realized)):
            raise DomainError(f'realized value for window {self.window_index} is not finite')
        self.point_forecast = self.predictive_draws.mean(axis=0)


@dataclass(frozen=True)
class RollingPlan:
    """
    Windows of R observations ending at origins start, start + 1, ..., end (0-based);
    each origin t forecasts t + 1.
    """
    window_length: int
    start: int
    end: int
    step: int = 1

    def __post_init__(self):
        if self.step != 1:
            raise DomainError('rolling windows advance one period at a time')
        if self.start < self.window_length - 1:
            raise DomainError(f'first origin {self.start} leaves fewer than R={self.window_length} observations')
        if self.end < self.start:
            raise DomainError(f'no forecast origins between {self.start} and {self.end}')

    @classmethod
    def for_length(cls, T, window_length):
        """All origins R-1, ..., T-2: T - R one-step forecasts."""
        if T < window_length + 1:
            raise DomainError(f'need at least R + 1 = {window_length + 1} observations, have {T}')
        return cls(window_length, window_length - 1, T - 2)

    def origins(self):
        return range(self.start, self.end + 1, self.step)

    def __len__(self):
        return len(self.origins())


def predictive_draws(draws, last_obs, n_draws, rng):
    """
    Composition sampling of y_T+1: for each of the first n_draws posterior draws,
    x' A + e with e ~ N(0, Sigma).

    Parameters:
    draws (PosteriorDraws): Posterior draws of (alpha, Sigma).
    last_obs (array): The p most recent observations, oldest first (p x m).
    n_draws (int): Number of predictive draws; each posterior draw is used once.
    rng (RngStream): Random stream.

    Returns:
    array: n_draws x m predictive draws.

    Errors:
    DomainError: Thrown for empty draws, too many requested draws or mismatched lags.
    """
    if len(draws) == 0:
        raise DomainError('no posterior draws to forecast from')
    if n_draws > len(draws):
        raise DomainError(f'requested {n_draws} predictive draws from {len(draws)} posterior draws')
    last_obs = np.atleast_2d(np.asarray(last_obs, dtype=float))
    if last_obs.shape != (draws.p, draws.m):
        raise DomainError(f'last_obs must be {draws.p}x{draws.m}, got {last_obs.shape}')
    x = varcore.regressor_row(last_obs[::-1], draws.intercept)

    output = np.empty((n_draws, draws.m))
    for s in range(n_draws):
        A = draws.coefficient_draw(s)
        output[s] = randmat.sample_mvn(x @ A, draws.sigma_draws[s], rng)
    return output


def _errors(records, variable_index):
    if not records:
        raise DomainError('no forecast records to score')
    return np.array([record.point_forecast[variable_index] - record.realized[variable_index]
                     for record in records])


def rmse(records, variable_index):
    """Root mean squared error of the predictive mean for one variable across windows."""
    errors = _errors(records, variable_index)
    return float(np.sqrt(np.mean(errors ** 2)))


def _draws_and_outcome(record, variable_index):
    values = record.predictive_draws[:, variable_index]
    if values.size < 2:
        raise DomainError('CRPS needs at least two predictive draws')
    return values, record.realized[variable_index]


def crps(record, variable_index):
    """
    CRPS = E|Y - y| - 0.5 E|Y - Y'|, with E|Y - Y'| estimated over the fixed circular
    pairing (Y_s, Y_s+1 mod S) so the score is deterministic. The two terms can agree
    exactly (by the triangle inequality) and then rounding may leave a tiny negative
    difference, so the score is floored at zero.
    """
    values, outcome = _draws_and_outcome(record, variable_index)
    first = np.mean(np.abs(values - outcome))
    second = 0.5 * np.mean(np.abs(values - np.roll(values, -1)))
    return max(float(first - second), 0.0)


def crps_pairwise(record, variable_index):
    """CRPS with E|Y - Y'| as the full double mean; exact for the empirical predictive."""
    values, outcome = _draws_and_outcome(record, variable_index)
    ordered = np.sort(values)
    n = ordered.size
    # sum_{i,j} |y_i - y_j| = 2 sum_i (2i - n + 1) y_(i)
    pair_sum = 2.0 * np.sum((2.0 * np.arange(n) - n + 1.0) * ordered)
    return max(float(np.mean(np.abs(values - outcome)) - 0.5 * pair_sum / (n * n)), 0.0)


def crps_integral(record, variable_index):
    """Integral of (F(z) - 1{y <= z})^2 for the empirical predictive F, piece by piece."""
    values, outcome = _draws_and_outcome(record, variable_index)
    ordered = np.sort(values)
    n = ordered.size
    knots = np.sort(np.append(ordered, outcome))
    total = 0.0
    for left, right in zip(knots[:-1], knots[1:]):
        if right <= left:
            continue
        cdf = np.searchsorted(ordered, left, side='right') / n
        indicator = 1.0 if outcome <= left else 0.0
        total += (cdf - indicator) ** 2 * (right - left)
    return float(total)


def _fit_window(data, origin, p, prior, plan, config, n_draws):
    window = data.window(origin - plan.window_length + 1, origin + 1)
    design = varcore.build_lag_design(window, p, prior.k == window.m * p + 1)
    draws = inference.run_gibbs(design, prior, config, logging.getLogger('lbvar.worker'))
    rng = config.rng().substream('predictive')
    count = len(draws) if n_draws is None else min(n_draws, len(draws))
    simulated = predictive_draws(draws, window.observations[-p:], count, rng)
    record = ForecastRecord(origin - plan.start, origin, simulated, data.observations[origin + 1])
    if draws.nu_draws.size:
        summary = inference.summarize(draws)
        record.nu_mean, record.nu_hpd_low, record.nu_hpd_high = summary.nu_mean, summary.nu_hpd_low, summary.nu_hpd_high
    return record


def _safe_fit_window(data, origin, p, prior, plan, config, n_draws):
    try:
        return _fit_window(data, origin, p, prior, plan, config, n_draws), None
    except LbvarError as e:
        return None, f'window at origin {origin}: {e}'


def window_stream(config, window_index):
    return config.with_stream(randmat.stream_key(config.stream_id, 'window', window_index))


def rolling_forecast(data, p, prior, plan, config, n_draws=None, n_jobs=1, logger=None):
    """
    Refits the BVAR on every rolling window and records one-step-ahead predictive draws.

    Window i uses the stream derived from (config.stream_id, i), so runs are identical for
    any n_jobs and the fixed and loss-based priors see matched random numbers.

    Parameters:
    data (VarDataset): The full sample.
    p (int): Lag order.
    prior (NormalWishartPrior): Prior for every window; an intercept is used when its k is m p + 1.
    plan (RollingPlan): Window length and origins.
    config (SamplerConfig): Gibbs settings.
    n_draws (int): Predictive draws per window (default: all retained draws).
    n_jobs (int): Worker processes.
    logger (logging.Logger): Optional logger.

    Returns:
    list: ForecastRecords in window order. Windows whose sampler failed are skipped and
          reported as a warning with their count.

    Errors:
    DomainError: Thrown when the data are too short for the plan.
    """
    logger = logging.getLogger('lbvar') if logger is None else logger
    if plan.end + 1 >= data.T:
        raise DomainError(f'last origin {plan.end} has no realised value in a sample of {data.T}')
    if plan.window_length < p + 2:
        raise DomainError(f'window length {plan.window_length} is below p + 2 = {p + 2}')

    tasks = [(origin, window_stream(config, origin - plan.start)) for origin in plan.origins()]
    logger.info(f'Rolling forecast: {len(tasks)} windows of {plan.window_length} observations, scheme {prior.nu_scheme.label()}')
    results = Parallel(n_jobs=n_jobs)(
        delayed(_safe_fit_window)(data, origin, p, prior, plan, window_config, n_draws)
        for origin, window_config in tasks)

    records, failures = [], []
    for record, failure in results:
        if record is None:
            failures.append(failure)
        else:
            records.append(record)
    if failures:
        logger.warning(f'{len(failures)} of {len(tasks)} windows skipped after sampler failures')
        for failure in failures:
            logger.debug(failure)
    return records


def align_records(records_fixed, records_loss, logger=None):
    """Keeps only windows present under both priors."""
    logger = logging.getLogger('lbvar') if logger is None else logger
    common = {r.window_index for r in records_fixed} & {r.window_index for r in records_loss}
    dropped = len(records_fixed) + len(records_loss) - 2 * len(common)
    if dropped:
        logger.warning(f'Dropping {dropped} unpaired forecast records from the comparison')
    return ([r for r in records_fixed if r.window_index in common],
            [r for r in records_loss if r.window_index in common])


def _ratio(loss, fixed):
    """loss / fixed, NaN wherever the fixed-prior score is zero and the ratio is undefined."""
    loss, fixed = np.asarray(loss, dtype=float), np.asarray(fixed, dtype=float)
    return np.divide(loss, fixed, out=np.full(fixed.shape, np.nan), where=fixed > 0.0)


@dataclass
class MetricReport:
    variable_names: list
    rmse_fixed: np.ndarray
    rmse_loss: np.ndarray
    crps_fixed: np.ndarray
    crps_loss: np.ndarray
    windows: int

    @property
    def rmse_ratio(self):
        return _ratio(self.rmse_loss, self.rmse_fixed)

    @property
    def crps_ratio(self):
        return _ratio(self.crps_loss, self.crps_fixed)

    def to_frame(self):
        return pd.DataFrame({
            'variable': self.variable_names,
            'rmse_fixed': self.rmse_fixed,
            'rmse_loss': self.rmse_loss,
            'rmse_ratio': self.rmse_ratio,
            'crps_fixed': self.crps_fixed,
            'crps_loss': self.crps_loss,
            'crps_ratio': self.crps_ratio,
        })

    def to_dict(self):
        frame = self.to_frame()
        # undefined ratios are written as null
        rows = frame.astype(object).where(frame.notna(), None)
        return {'windows': self.windows, 'rows': rows.to_dict(orient='records')}


def _mean_crps(records, variable_index):
    return float(np.mean([crps(record, variable_index) for record in records]))


def compare_priors(records_fixed, records_loss, variable_names=None, logger=None):
    """
    RMSE and mean CRPS per variable under both priors and their ratios loss / fixed;
    a ratio below 1 favours the loss-based prior. A variable whose fixed-prior score is
    zero gets a NaN ratio and a warning rather than an infinite one.

    Errors:
    DomainError: Thrown when the two record lists do not cover the same windows.
    """
    if not records_fixed or not records_loss:
        raise DomainError('both priors need forecast records')
    if [r.window_index for r in records_fixed] != [r.window_index for r in records_loss]:
        raise DomainError('fixed and loss-based records cover different windows')
    logger = logging.getLogger('lbvar') if logger is None else logger
    m = records_fixed[0].realized.size
    names = [f'y{i + 1}' for i in range(m)] if variable_names is None else list(variable_names)
    report = MetricReport(
        names,
        np.array([rmse(records_fixed, i) for i in range(m)]),
        np.array([rmse(records_loss, i) for i in range(m)]),
        np.array([_mean_crps(records_fixed, i) for i in range(m)]),
        np.array([_mean_crps(records_loss, i) for i in range(m)]),
        len(records_fixed))
    undefined = [name for name, rmse_ratio, crps_ratio in zip(names, report.rmse_ratio, report.crps_ratio)
                 if np.isnan(rmse_ratio) or np.isnan(crps_ratio)]
    if undefined:
        logger.warning(f'Fixed-prior score is zero for {undefined}, ratios left undefined')
    return report


def nu_trajectory(records):
    """Per-window posterior mean of nu and its 95% HPD bounds."""
    return pd.DataFrame({
        'window': [r.window_index for r in records],
        'origin': [r.origin_time for r in records],
        'nu_mean': [r.nu_mean for r in records],
        'nu_hpd_low': [r.nu_hpd_low for r in records],
        'nu_hpd_high': [r.nu_hpd_high for r in records],
    })
