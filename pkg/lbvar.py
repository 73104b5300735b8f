from dataclasses import replace
import argparse
import logging
import os
import sys

import numpy as np
import pandas as pd

from errors import ConfigError, DomainError, IngestError, LbvarError, NumericalError
import config as configuration
import formatting
import forecastkit
import ingest
import inference
import lossprior
import mcstudy
import randmat
import samples
import varcore

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _shared_options():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument('--config', type=str, metavar='PATH',
                        help='Flat YAML config file. Command-line flags override its values.')
    shared.add_argument('--seed', type=int,
                        help='Master seed. Identical seeds and configs give byte-identical outputs.')
    shared.add_argument('--out', type=str, metavar='DIR',
                        help='Output directory for the bundle. Defaults to lbvar-out.')
    shared.add_argument('--threads', type=int, metavar='N',
                        help='Worker processes for windows and replications. Defaults to every core.')
    shared.add_argument('-l', '--log-level', type=int, choices=range(0, 3),
                        help='Set the log level. 0 = no logs, 1 = brief logs, 2 = verbose logs.')
    return shared


def _sampler_options():
    sampler = argparse.ArgumentParser(add_help=False)
    sampler.add_argument('--iterations', type=int, help='Gibbs sweeps, burn-in included. Defaults to 6000.')
    sampler.add_argument('--burn-in', type=int, help='Sweeps discarded before retaining draws. Defaults to 1000.')
    sampler.add_argument('--thin', type=int, help='Keep every thin-th draw after burn-in. Defaults to 1.')
    sampler.add_argument('--mh-step', type=int, help='Largest nu proposal step. Defaults to 3.')
    sampler.add_argument('--nu-scheme', type=str, metavar='{loss,fixed:<int>}',
                         help='Treatment of the Wishart degrees of freedom. Defaults to loss.')
    sampler.add_argument('--v0-scale', type=float, help='Prior coefficient variance, V0 = v0_scale I.')
    sampler.add_argument('--s0-scale', type=float, help='Prior Wishart scale, S0 = s0_scale I.')
    return sampler


def _data_options():
    data = argparse.ArgumentParser(add_help=False)
    data.add_argument('--data', type=str, metavar='CSV', help='Input CSV with a header row.')
    data.add_argument('--date-column', type=str, help='Label column excluded from the model.')
    data.add_argument('--columns', type=str, help='Comma-separated subset of variables, in order.')
    data.add_argument('--transform', type=str,
                      help='none, diff, log, logdiff or pct; per column as name=transform,... .')
    data.add_argument('-p', '--p', type=int, dest='p', help='Lag order.')
    data.add_argument('--intercept', action='store_const', const=True, help='Add a constant to every equation.')
    return data


def get_arguments(argv=None):
    parser = argparse.ArgumentParser(
        prog='lbvar',
        description='Bayesian VARs with a loss-based prior on the Wishart degrees of freedom.')
    commands = parser.add_subparsers(dest='command', required=True)
    shared, sampler, data = _shared_options(), _sampler_options(), _data_options()

    simulate = commands.add_parser('simulate', parents=[shared],
                                   help='Write a synthetic VAR dataset and its true parameters.')
    simulate.add_argument('-m', type=int, dest='m', help='Number of variables. Defaults to 3.')
    simulate.add_argument('-T', type=int, dest='T', help='Number of observations. Defaults to 100.')
    simulate.add_argument('-p', '--p', type=int, dest='p', help='Lag order. Defaults to 1.')
    simulate.add_argument('--nu-true', type=int, help='Sigma ~ IW(nu_true, Psi). Defaults to m + 1.')
    simulate.add_argument('--coeff-diagonal', type=float, help='A_1 = coeff_diagonal I. Defaults to 0.5.')

    commands.add_parser('fit', parents=[shared, sampler, data],
                        help='Run the Gibbs sampler once and write the draws and their summary.')

    forecast = commands.add_parser('forecast', parents=[shared, sampler, data],
                                   help='Rolling one-step forecasts under the fixed and loss-based priors.')
    forecast.add_argument('-R', '--window', type=int, help='Rolling window length.')
    forecast.add_argument('--n-draws', type=int, help='Predictive draws per window.')

    study = commands.add_parser('study', parents=[shared, sampler],
                                help='Monte Carlo comparison of the two nu schemes by RMAD.')
    study.add_argument('--preset', type=str, choices=('desk', 'full'), help='Study grid. Defaults to desk.')
    study.add_argument('--replications', type=int, help='Paired replications per cell.')
    study.add_argument('--study-m', type=str, help='Comma-separated dimensions, e.g. 5,10.')
    study.add_argument('--study-T', type=str, dest='study_T', help='Comma-separated sample sizes, e.g. 30,100.')

    verify = commands.add_parser('verify', parents=[shared],
                                 help='Check the KL argmin grid and the properness of the nu posterior.')
    verify.add_argument('--verify-m-max', type=int, help='Largest dimension in the grid. Defaults to 15.')
    verify.add_argument('--verify-k-max', type=int, help='Largest nu - m in the grid. Defaults to 25.')
    verify.add_argument('--verify-c-max', type=int, help='Largest |c| in the grid. Defaults to 5.')

    commands.add_parser('template', help='Print a commented config template.')

    return parser.parse_args(argv)


def get_logger(args):
    """
    Creates and configures the lbvar logger from a numeric log level.

    Parameters:
    args (object): Anything with a log_level attribute (parsed arguments or a RunConfig);
                None means brief logs.

    Returns:
    logger: The configured logger object.

    Notes:
    0 shows only critical messages, 1 brief logs (INFO), 2 verbose logs (DEBUG). The
     console handler is attached once, so repeated calls only change the level.
    """
    logger = logging.getLogger('lbvar')
    level = getattr(args, 'log_level', None)
    if level == 0:
        logger.setLevel(logging.CRITICAL)
    elif level == 2:
        logger.setLevel(logging.DEBUG)
    else:
        logger.setLevel(logging.INFO)

    if not logger.handlers:
        ch = logging.StreamHandler()
        formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s')
        ch.setFormatter(formatter)
        logger.addHandler(ch)

    return logger


def load_dataset(config):
    try:
        return ingest.ingest_csv(config.data, config.transform, config.date_column,
                                 config.column_list(), config.frequency)
    except IngestError:
        raise
    except DomainError as e:
        raise IngestError(str(e)) from e


def build_prior(config, m, k, nu_scheme=None):
    return inference.NormalWishartPrior.default(m, k, config.scheme() if nu_scheme is None else nu_scheme,
                                                config.v0_scale, config.s0_scale * np.eye(m))


def cmd_simulate(config, logger):
    m, T, p = config.m, config.T, config.p or 1
    nu_true = config.nu_true if config.nu_true is not None else m + 1
    rng = randmat.RngStream(config.seed, randmat.stream_key('simulate'))
    coeffs = varcore.default_coefficients(m, p, config.coeff_diagonal)
    source = varcore.InverseWishartSource(nu_true)
    data, truth = varcore.simulate_var(m, T, p, coeffs, source, rng)
    logger.info(f'Simulated {T} observations of a {m}-variable VAR({p}) with nu_true={nu_true}')

    frame = pd.DataFrame(data.observations, columns=data.variable_names)
    outputs = [
        formatting.write_frame(frame, os.path.join(config.out, 'data.csv')),
        formatting.write_json({
            'm': m, 'T': T, 'p': p, 'nu_true': nu_true,
            'scale': source.resolve_scale(m),
            'A': truth.A,
            'Sigma': truth.Sigma,
            'spectral_radius': varcore.spectral_radius(coeffs),
        }, os.path.join(config.out, 'truth.json')),
    ]
    return outputs


def cmd_fit(config, logger):
    dataset = load_dataset(config)
    p = config.p or 1
    design = varcore.build_lag_design(dataset, p, config.intercept)
    prior = build_prior(config, dataset.m, design.k)
    logger.info(f'Fitting a {dataset.m}-variable VAR({p}) on {design.T_eff} observations, '
                f'nu scheme {prior.nu_scheme.label()}')
    draws = inference.run_gibbs(design, prior, config.sampler(randmat.stream_key('fit')), logger)
    summary = inference.summarize(draws)
    if summary.nu_mean is not None:
        logger.info(f'nu posterior mean {summary.nu_mean:.3f}, 95% HPD [{summary.nu_hpd_low}, '
                    f'{summary.nu_hpd_high}], MH acceptance {summary.mh_acceptance:.3f}')
    return formatting.write_draws_bundle(config.out, draws, summary, dataset.variable_names)


def cmd_forecast(config, logger):
    dataset = load_dataset(config)
    p = config.p
    plan = forecastkit.RollingPlan.for_length(dataset.T, config.window)
    k = dataset.m * p + int(config.intercept)
    scheme = config.scheme()
    baseline = scheme if isinstance(scheme, inference.FixedNu) else inference.FixedNu(dataset.m + 1)
    prior_loss = build_prior(config, dataset.m, k, inference.LossBasedNu())
    prior_fixed = prior_loss.with_scheme(baseline)
    sampler = config.sampler(randmat.stream_key('forecast'))

    records_fixed = forecastkit.rolling_forecast(dataset, p, prior_fixed, plan, sampler, config.n_draws,
                                                 config.n_jobs(), logger)
    records_loss = forecastkit.rolling_forecast(dataset, p, prior_loss, plan, sampler, config.n_draws,
                                                config.n_jobs(), logger)
    records_fixed, records_loss = forecastkit.align_records(records_fixed, records_loss, logger)
    report = forecastkit.compare_priors(records_fixed, records_loss, dataset.variable_names, logger)
    print(formatting.format_table(report.to_frame()))

    return [
        formatting.write_frame(report.to_frame(), os.path.join(config.out, 'metric_report.csv')),
        formatting.write_json(report.to_dict(), os.path.join(config.out, 'metric_report.json')),
        formatting.write_frame(forecastkit.nu_trajectory(records_loss), os.path.join(config.out, 'nu_trajectory.csv')),
    ]


def _study_grid(config):
    grid = mcstudy.StudyGrid.desk() if config.preset == 'desk' else mcstudy.StudyGrid()
    overrides = {'p': config.p or 1, 'coeff_diagonal': config.coeff_diagonal}
    if config.replications is not None:
        overrides['replications'] = config.replications
    try:
        if config.study_m:
            overrides['m_values'] = tuple(int(m) for m in configuration.split_list(config.study_m))
        if config.study_T:
            overrides['T_values'] = tuple(int(T) for T in configuration.split_list(config.study_T))
        return replace(grid, **overrides)
    except (ValueError, DomainError) as e:
        raise ConfigError(f'invalid study grid: {e}') from e


def cmd_study(config, logger):
    grid = _study_grid(config)
    cells = len(list(grid.cells()))
    logger.info(f'Study: {cells} cells x {grid.replications} replications, {config.iterations} sweeps each')
    rmad_samples = mcstudy.run_study(grid, config.sampler(), config.n_jobs(), logger)
    summary = mcstudy.summarize_cells(rmad_samples)
    print(formatting.format_table(summary))
    if not mcstudy.direction_of_effect(rmad_samples):
        logger.warning('The loss-based advantage does not grow with nu_true in every (m, T) group')

    return [
        mcstudy.export_boxplot_data(rmad_samples, os.path.join(config.out, 'boxplot.csv')),
        formatting.write_frame(summary, os.path.join(config.out, 'cell_summary.csv')),
        mcstudy.write_study_manifest(grid, config.sampler(), configuration.VERSION,
                                     os.path.join(config.out, 'study_manifest.json')),
    ]


def cmd_verify(config, logger):
    report = lossprior.verify_kl_argmin(range(2, config.verify_m_max + 1), range(1, config.verify_k_max + 1),
                                       range(-config.verify_c_max, config.verify_c_max + 1))
    m = 3
    diagnostic = lossprior.properness_diagnostic(m, 5.0 * np.eye(m), np.eye(m), m + 500)
    logger.info(f'KL argmin check: {"PASS" if report.passed else "FAIL"} over {len(report.rows)} grid points, '
                f'worst margin {report.worst_margin:.3e}')
    logger.info(f'Properness check: tail mass {diagnostic.tail_mass:.3e}, '
                f'{"proper" if diagnostic.proper else "NOT proper"}')
    outputs = [
        formatting.write_json(report.to_dict(), os.path.join(config.out, 'kl_argmin.json')),
        formatting.write_json(diagnostic.to_dict(), os.path.join(config.out, 'properness.json')),
    ]
    if not report.passed or not diagnostic.proper:
        raise NumericalError(f'verification failed: {len(report.failures)} KL grid failures, '
                             f'properness {diagnostic.proper}')
    return outputs


COMMANDS = {
    'simulate': cmd_simulate,
    'fit': cmd_fit,
    'forecast': cmd_forecast,
    'study': cmd_study,
    'verify': cmd_verify,
}


def _overrides(args):
    names = configuration.field_types()
    return {key: value for key, value in vars(args).items()
            if key in names and key not in ('command', 'config')}


def main(argv=None):
    """
    The entry point: parses arguments, resolves the run configuration and runs one
    command, writing its bundle and manifest.

    Returns:
    int: 0 on success, 2 for configuration errors, 3 for runtime or numerical errors.

    Notes:
    A runtime failure still writes manifest.json with status 'failed', the error text
     and whatever outputs were written before the failure.
    """
    args = get_arguments(argv)
    logger = get_logger(args)

    if args.command == 'template':
        print(samples.config_template, end='')
        return EXIT_OK

    try:
        config = configuration.resolve(args.command, args.config, _overrides(args))
        formatting.ensure_directory(config.out)
    except ConfigError as e:
        logger.critical(f'Configuration error: {e}')
        return EXIT_CONFIG
    except OSError as e:
        logger.critical(f'Cannot create the output directory: {e}')
        return EXIT_CONFIG

    logger = get_logger(config)
    logger.info(f'lbvar {configuration.VERSION} {config.command}: seed {config.seed}, output in {config.out}')
    try:
        outputs = COMMANDS[config.command](config, logger)
    except ConfigError as e:
        logger.critical(f'Configuration error: {e}')
        return EXIT_CONFIG
    except (LbvarError, OSError) as e:
        logger.error(f'{config.command} failed: {e}')
        written = sorted(os.path.join(config.out, name) for name in os.listdir(config.out)
                         if name != 'manifest.json')
        formatting.write_manifest(config.out, config, configuration.VERSION, 'failed', written, e)
        return EXIT_RUNTIME

    manifest = formatting.write_manifest(config.out, config, configuration.VERSION, 'ok', outputs)
    for path in outputs:
        logger.info(f'Wrote {path}')
    logger.info(f'Wrote {manifest}')
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
