import numpy as np
import pytest

from errors import DomainError, IngestError
import ingest


def table(rows, header='a,b,c'):
    return header + '\n' + '\n'.join(rows) + '\n'


def test_plain_numeric_file(write_csv):
    rows = [f'{i},{i * 2},{i * 3}' for i in range(1, 11)]
    data = ingest.ingest_csv(write_csv(table(rows)))
    assert (data.T, data.m) == (10, 3)
    assert data.variable_names == ['a', 'b', 'c']
    np.testing.assert_array_equal(data.observations[-1], [10.0, 20.0, 30.0])


def test_logdiff_shortens_all_columns(write_csv):
    path = write_csv(table(['100,1', '110,2', '121,4'], header='level,x'))
    data = ingest.ingest_csv(path, 'level=logdiff')
    np.testing.assert_allclose(data.observations[:, 0], [np.log(1.1), np.log(1.1)], rtol=1e-12)
    np.testing.assert_array_equal(data.observations[:, 1], [2.0, 4.0])
    assert data.observations[0, 0] == pytest.approx(0.09531, abs=1e-5)


def test_other_transforms(write_csv):
    path = write_csv(table(['1,2,4', '2,4,8', '4,8,16'], header='d,p,l'))
    data = ingest.ingest_csv(path, 'd=diff,p=pct,l=log')
    np.testing.assert_allclose(data.observations[:, 0], [1.0, 2.0])
    np.testing.assert_allclose(data.observations[:, 1], [1.0, 1.0])
    np.testing.assert_allclose(data.observations[:, 2], np.log([8.0, 16.0]))


def test_date_column_is_carried_as_labels(write_csv):
    path = write_csv(table(['2020Q1,1,2', '2020Q2,2,3', '2020Q3,4,5'], header='date,x,y'))
    data = ingest.ingest_csv(path, 'diff', date_column='date', frequency='Q')
    assert data.variable_names == ['x', 'y']
    assert data.time_labels == ['2020Q2', '2020Q3']
    assert data.frequency == 'Q'
    with pytest.raises(IngestError):
        ingest.ingest_csv(path, date_column='when')


def test_missing_cell_names_its_coordinates(write_csv):
    rows = [f'{i},{i},{i}' for i in range(1, 11)]
    rows[6] = '7,,7'
    with pytest.raises(IngestError, match='row 7, column 2'):
        ingest.ingest_csv(write_csv(table(rows)))


def test_non_numeric_cell(write_csv):
    with pytest.raises(IngestError, match='non-numeric cell at row 2, column 3'):
        ingest.ingest_csv(write_csv(table(['1,2,3', '4,5,abc'])))


def test_ragged_rows(write_csv):
    with pytest.raises(IngestError):
        ingest.ingest_csv(write_csv(table(['1,2,3', '4,5,6,7', '8,9,10'])))
    with pytest.raises(IngestError, match='row 2'):
        ingest.ingest_csv(write_csv(table(['1,2,3', '4,5', '8,9,10'])))


def test_log_needs_positive_values(write_csv):
    with pytest.raises(IngestError, match='row 3, column 1'):
        ingest.ingest_csv(write_csv(table(['1,1', '2,1', '0,1'], header='a,b')), 'a=log')


def test_column_subset(write_csv):
    data = ingest.ingest_csv(write_csv(table(['1,2,3', '4,5,6', '7,8,9'])), columns=['c', 'a'])
    assert data.variable_names == ['c', 'a']
    np.testing.assert_array_equal(data.observations[:, 0], [3.0, 6.0, 9.0])


def test_missing_and_empty_files(tmp_path, write_csv):
    with pytest.raises(IngestError):
        ingest.ingest_csv(str(tmp_path / 'absent.csv'))
    with pytest.raises(IngestError):
        ingest.ingest_csv(write_csv('a,b\n'))


def test_series_transform_parsing():
    spec = ingest.SeriesTransform.parse('logdiff, ffr=none')
    assert spec.for_column('gdp') == 'logdiff'
    assert spec.for_column('ffr') == 'none'
    assert spec.to_text() == 'logdiff,ffr=none'
    assert ingest.SeriesTransform.parse(None) == ingest.SeriesTransform()
    with pytest.raises(DomainError):
        ingest.SeriesTransform.parse('gdp=sqrt')


def test_unselected_columns_are_not_transformed(write_csv):
    path = write_csv(table(['1,0,5', '2,-1,x', '4,3,7'], header='a,b,note'))
    data = ingest.ingest_csv(path, 'logdiff', columns=['a'])
    assert data.variable_names == ['a']
    np.testing.assert_allclose(data.observations[:, 0], [np.log(2.0), np.log(2.0)], rtol=1e-12)
    with pytest.raises(IngestError, match='column 2'):
        ingest.ingest_csv(path, 'logdiff', columns=['a', 'b'])


def test_unknown_selected_column(write_csv):
    with pytest.raises(IngestError, match="'z'"):
        ingest.ingest_csv(write_csv(table(['1,2,3', '4,5,6'])), columns=['a', 'z'])
