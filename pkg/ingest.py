"""CSV ingestion with per-column stationarity transforms."""
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from errors import DomainError, IngestError
from varcore import VarDataset

TRANSFORMS = ('none', 'diff', 'log', 'logdiff', 'pct')
LOG_FAMILY = ('log', 'logdiff')
DIFFERENCING = ('diff', 'logdiff', 'pct')


@dataclass(frozen=True)
class SeriesTransform:
    """
    A default transform plus per-column overrides.

    Parsed from 'logdiff' (every column) or 'gdp=logdiff,ffr=none' (named columns;
    a bare entry without '=' sets the default).
    """
    default: str = 'none'
    per_column: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in [self.default, *self.per_column.values()]:
            if name not in TRANSFORMS:
                raise DomainError(f'unknown transform {name!r}; choose from {", ".join(TRANSFORMS)}')

    @classmethod
    def parse(cls, text):
        if text is None or not str(text).strip():
            return cls()
        default, per_column = 'none', {}
        for entry in str(text).split(','):
            entry = entry.strip()
            if not entry:
                continue
            if '=' in entry:
                column, name = (part.strip() for part in entry.split('=', 1))
                per_column[column] = name.lower()
            else:
                default = entry.lower()
        return cls(default, per_column)

    def for_column(self, column):
        return self.per_column.get(column, self.default)

    def to_text(self):
        return ','.join([self.default] + [f'{c}={t}' for c, t in self.per_column.items()])


def _apply(series, name, column_number):
    if name in LOG_FAMILY and np.any(series.to_numpy() <= 0.0):
        row = int(np.argmax(series.to_numpy() <= 0.0)) + 1
        raise IngestError(f'{name} transform needs positive values: row {row}, column {column_number}')
    if name == 'none':
        return series
    if name == 'diff':
        return series.diff()
    if name == 'log':
        return np.log(series)
    if name == 'logdiff':
        return np.log(series).diff()
    return series.pct_change(fill_method=None)


def ingest_csv(path, transform=None, date_column=None, columns=None, frequency=''):
    """
    Reads a rectangular CSV (header row, numeric body) into a VarDataset.

    Parameters:
    path (str): CSV file.
    transform (SeriesTransform | str): Per-column transforms; differencing transforms
                drop the first row of every column so the series stay aligned.
    date_column (str): Optional label column carried as time labels and excluded from
                the math.
    columns (list): Optional subset of variables, in order. Columns left out are neither
                parsed nor transformed.
    frequency (str): Free-form frequency label.

    Returns:
    VarDataset: The transformed observations.

    Errors:
    IngestError: Thrown for ragged rows, missing or non-numeric cells and non-positive
                values under log transforms; messages name 'row r, column c' (1-based,
                data rows after the header, file columns).
    """
    transform = SeriesTransform.parse(transform) if not isinstance(transform, SeriesTransform) else transform
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.ParserError as e:
        raise IngestError(f'{path}: ragged CSV: {e}') from e
    except (OSError, pd.errors.EmptyDataError) as e:
        raise IngestError(f'{path}: {e}') from e

    headers = list(raw.columns)
    if date_column is not None and date_column not in headers:
        raise IngestError(f'{path}: date column {date_column!r} not found in {headers}')
    value_columns = [c for c in headers if c != date_column]
    if columns:
        missing = [c for c in columns if c not in value_columns]
        if missing:
            raise IngestError(f'{path}: columns {missing} not found in {value_columns}')
        value_columns = list(columns)
    if not value_columns or raw.shape[0] == 0:
        raise IngestError(f'{path}: no numeric data')

    numeric = {}
    for column in value_columns:
        column_number = headers.index(column) + 1
        cells = raw[column]
        values = pd.to_numeric(cells, errors='coerce')
        bad = cells.isna() | (cells.str.strip() == '') | values.isna() | ~np.isfinite(values.fillna(0.0))
        if bad.any():
            row = int(np.argmax(bad.to_numpy())) + 1
            kind = 'missing' if cells.isna().iloc[row - 1] or not cells.iloc[row - 1].strip() else 'non-numeric'
            raise IngestError(f'{path}: {kind} cell at row {row}, column {column_number}')
        numeric[column] = _apply(values.astype(float), transform.for_column(column), column_number)

    frame = pd.DataFrame(numeric)
    if any(transform.for_column(c) in DIFFERENCING for c in value_columns):
        frame = frame.iloc[1:]
    if not np.all(np.isfinite(frame.to_numpy())):
        bad = ~np.isfinite(frame.to_numpy())
        row, col = np.argwhere(bad)[0]
        raise IngestError(f'{path}: transform produced a non-finite value at row {frame.index[row] + 1}, '
                          f'column {headers.index(value_columns[col]) + 1}')

    labels = raw[date_column].iloc[frame.index].tolist() if date_column is not None else None
    return VarDataset(frame.to_numpy(), value_columns, frequency, labels)
