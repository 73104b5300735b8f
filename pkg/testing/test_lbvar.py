import json
import os

import pandas as pd
import pytest

import lbvar

FAST = ['--iterations', '120', '--burn-in', '20', '--threads', '1', '-l', '0']


def run(*argv):
    return lbvar.main([str(arg) for arg in argv])


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / 'sim'
    assert run('simulate', '-m', 3, '-T', 60, '--nu-true', 8, '--seed', 5, '--out', out, '-l', 0) == 0
    return out / 'data.csv'


def read_json(path):
    with open(path) as infile:
        return json.load(infile)


def test_template_prints_the_config(capsys):
    assert run('template') == 0
    assert 'nu_scheme: loss' in capsys.readouterr().out


def test_simulate_bundle(dataset):
    out = dataset.parent
    frame = pd.read_csv(dataset)
    assert frame.shape == (60, 3)
    truth = read_json(out / 'truth.json')
    assert truth['nu_true'] == 8 and len(truth['Sigma']) == 3
    manifest = read_json(out / 'manifest.json')
    assert manifest['status'] == 'ok'
    assert manifest['master_seed'] == 5
    assert manifest['config']['nu_true'] == 8


def test_fit_writes_draws_and_summary(dataset, tmp_path):
    out = tmp_path / 'fit'
    assert run('fit', '--data', dataset, '--out', out, *FAST) == 0
    summary = read_json(out / 'summary.json')
    for key in ('nu_mean', 'nu_hpd_low', 'nu_hpd_high', 'mh_acceptance'):
        assert summary[key] is not None
    assert pd.read_csv(out / 'alpha.csv').shape == (100, 1 + 9)
    assert pd.read_csv(out / 'sigma.csv').shape == (100, 1 + 9)
    assert pd.read_csv(out / 'nu.csv').shape == (100, 2)


def test_forecast_report_and_reproducibility(dataset, tmp_path):
    bodies = []
    for name in ('first', 'second'):
        out = tmp_path / name
        assert run('forecast', '--data', dataset, '-p', 1, '-R', 40, '--out', out, '--seed', 3, *FAST) == 0
        bodies.append((out / 'metric_report.csv').read_bytes() + (out / 'nu_trajectory.csv').read_bytes())
    report = pd.read_csv(tmp_path / 'first' / 'metric_report.csv')
    assert report.shape == (3, 7)
    assert report['variable'].tolist() == ['y1', 'y2', 'y3']
    assert len(pd.read_csv(tmp_path / 'first' / 'nu_trajectory.csv')) == 20
    assert bodies[0] == bodies[1]


def test_config_errors_exit_with_two(dataset, tmp_path):
    assert run('forecast', '--data', dataset, '-p', 1, '--out', tmp_path / 'x', '-l', 0) == 2
    assert run('fit', '--data', dataset, '--nu-scheme', 'fixed:x', '--out', tmp_path / 'x', '-l', 0) == 2
    with pytest.raises(SystemExit) as raised:
        run('fit', '--no-such-flag')
    assert raised.value.code == 2


def test_runtime_errors_exit_with_three_and_keep_a_manifest(dataset, tmp_path):
    out = tmp_path / 'fail'
    assert run('fit', '--data', dataset, '-p', 59, '--out', out, *FAST) == 3
    manifest = read_json(out / 'manifest.json')
    assert manifest['status'] == 'failed'
    assert 'DomainError' in manifest['error']


def test_verify_writes_reports(tmp_path):
    out = tmp_path / 'verify'
    assert run('verify', '--verify-m-max', 4, '--verify-k-max', 5, '--out', out, '-l', 0) == 0
    argmin = read_json(out / 'kl_argmin.json')
    assert argmin['status'] == 'PASS' and argmin['grid_points'] == 15
    assert read_json(out / 'properness.json')['proper'] is True
    assert sorted(os.listdir(out)) == ['kl_argmin.json', 'manifest.json', 'properness.json']


def test_study_writes_boxplot_data(tmp_path):
    out = tmp_path / 'study'
    assert run('study', '--study-m', 5, '--study-T', 30, '--replications', 1, '--out', out, *FAST) == 0
    boxplot = pd.read_csv(out / 'boxplot.csv')
    assert list(boxplot.columns) == ['m', 'T', 'nu_true', 'scheme', 'replication', 'rmad_sigma', 'rmad_coeffs']
    assert len(boxplot) == 3 * 2
    assert len(pd.read_csv(out / 'cell_summary.csv')) == 3
    assert read_json(out / 'study_manifest.json')['grid']['m_values'] == [5]


def test_study_rejects_unknown_dimensions(tmp_path):
    assert run('study', '--study-m', 7, '--out', tmp_path / 'bad', *FAST) == 2
