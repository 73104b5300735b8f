import json
import os
import textwrap

import numpy as np
import pandas as pd

FLOAT_FORMAT = '%.17g'


def ensure_directory(path):
    os.makedirs(path, exist_ok=True)
    return path


def to_jsonable(value):
    """
    Converts numpy scalars and arrays (possibly nested in dicts and lists) into plain
    Python values that json can serialise.

    Parameters:
    value (object): Any mix of dicts, lists, tuples, numpy arrays and scalars.

    Returns:
    object: The same structure made of dict, list, int, float, str, bool and None.
    """
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def write_json(content, path):
    with open(path, 'w') as outfile:
        json.dump(to_jsonable(content), outfile, indent=2)
        outfile.write('\n')
    return path


def write_frame(frame, path):
    """Writes a DataFrame without its index, floats at 17 significant digits."""
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def build_manifest(config, version, status='ok', outputs=None, error=None):
    """
    The audit record every bundle carries: resolved config, master seed, version,
    status and the files written.
    """
    manifest = {
        'command': config.command,
        'version': version,
        'master_seed': config.seed,
        'status': status,
        'config': config.to_dict(),
        'outputs': sorted(outputs or []),
    }
    if error is not None:
        manifest['error'] = f'{type(error).__name__}: {error}'
    return manifest


def write_manifest(out_dir, config, version, status='ok', outputs=None, error=None):
    ensure_directory(out_dir)
    return write_json(build_manifest(config, version, status, outputs, error),
                      os.path.join(out_dir, 'manifest.json'))


def draws_frames(draws, names=None):
    """
    One table per parameter block: alpha (vec(A), column-major), sigma (all m x m
    entries row by row) and nu (empty under a fixed nu).
    """
    names = [f'y{i + 1}' for i in range(draws.m)] if names is None else list(names)
    regressors = [f'{name}_lag{lag}' for lag in range(1, draws.p + 1) for name in names]
    if draws.intercept:
        regressors = ['const'] + regressors
    if len(regressors) != draws.k:
        regressors = [f'x{i + 1}' for i in range(draws.k)]
    alpha_columns = [f'{regressors[i]}->{names[j]}' for j in range(draws.m) for i in range(draws.k)]
    sigma_columns = [f'{names[i]},{names[j]}' for i in range(draws.m) for j in range(draws.m)]

    alpha = pd.DataFrame(draws.alpha_draws, columns=alpha_columns)
    sigma = pd.DataFrame(draws.sigma_draws.reshape(len(draws), -1), columns=sigma_columns)
    nu = pd.DataFrame({'nu': draws.nu_draws})
    for frame in (alpha, sigma, nu):
        frame.insert(0, 'draw', np.arange(len(frame)))
    return alpha, sigma, nu


def write_draws_bundle(out_dir, draws, summary, names=None):
    """Writes alpha.csv, sigma.csv, nu.csv and summary.json; returns their paths."""
    ensure_directory(out_dir)
    alpha, sigma, nu = draws_frames(draws, names)
    paths = [
        write_frame(alpha, os.path.join(out_dir, 'alpha.csv')),
        write_frame(sigma, os.path.join(out_dir, 'sigma.csv')),
        write_frame(nu, os.path.join(out_dir, 'nu.csv')),
        write_json(summary.to_dict(), os.path.join(out_dir, 'summary.json')),
    ]
    return paths


def format_table(frame, max_width=79, precision=4):
    """
    Renders a small DataFrame for the console; cells wider than the column share of
    max_width are wrapped onto continuation lines.
    """
    headers = [str(column) for column in frame.columns]
    rows = [[_cell(value, precision) for value in row] for row in frame.itertuples(index=False)]
    share = max(8, max_width // max(1, len(headers)) - 1)
    widths = [min(share, max([len(h)] + [len(row[i]) for row in rows])) for i, h in enumerate(headers)]

    def format_row(cells):
        wrapped = [textwrap.wrap(cell, width=widths[i]) or [''] for i, cell in enumerate(cells)]
        height = max(len(lines) for lines in wrapped)
        return [' '.join(lines[r].rjust(widths[i]) if r < len(lines) else ' ' * widths[i]
                         for i, lines in enumerate(wrapped)) for r in range(height)]

    lines = format_row(headers)
    lines.append('-' * min(max_width, sum(widths) + len(widths) - 1))
    for row in rows:
        lines.extend(format_row(row))
    return '\n'.join(lines)


def _cell(value, precision):
    if isinstance(value, (float, np.floating)):
        return 'nan' if np.isnan(value) else f'{value:.{precision}g}'
    return str(value)
