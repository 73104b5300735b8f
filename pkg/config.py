"""
Run configuration: dataclass defaults, overridden by a flat YAML file, overridden by
command-line flags. The resolved configuration is what every output bundle records.
"""
from dataclasses import asdict, dataclass, fields
import os

import yaml

from errors import ConfigError, DomainError
import inference
import ingest

VERSION = '0.1.0'
COMMANDS = ('simulate', 'fit', 'forecast', 'study', 'verify')
# sampler defaults of the desk study preset, used unless the file or a flag sets them
DESK_SAMPLER = {'iterations': 2000, 'burn_in': 500}


@dataclass
class RunConfig:
    command: str = None
    out: str = 'lbvar-out'
    seed: int = 20240101
    threads: int = None
    log_level: int = 1

    # data
    data: str = None
    date_column: str = None
    columns: str = None
    transform: str = 'none'
    frequency: str = ''

    # model
    p: int = None
    intercept: bool = False
    nu_scheme: str = 'loss'
    v0_scale: float = 10.0
    s0_scale: float = 1.0

    # sampler
    iterations: int = 6000
    burn_in: int = 1000
    thin: int = 1
    mh_step: int = 3

    # forecast
    window: int = None
    n_draws: int = None

    # simulate
    m: int = 3
    T: int = 100
    nu_true: int = None
    coeff_diagonal: float = 0.5

    # study
    preset: str = 'desk'
    replications: int = None
    study_m: str = None
    study_T: str = None

    # verify
    verify_m_max: int = 15
    verify_k_max: int = 25
    verify_c_max: int = 5

    def to_dict(self):
        return asdict(self)

    def sampler(self, stream_id=0):
        try:
            return inference.SamplerConfig(self.iterations, self.burn_in, self.thin, self.mh_step,
                                           self.seed, stream_id)
        except DomainError as e:
            raise ConfigError(str(e)) from e

    def scheme(self):
        try:
            return inference.parse_nu_scheme(self.nu_scheme)
        except DomainError as e:
            raise ConfigError(str(e)) from e

    def n_jobs(self):
        """joblib worker count; unset means every available core."""
        return -1 if self.threads is None else self.threads

    def column_list(self):
        return split_list(self.columns)

    def validate(self):
        """
        Rejects invalid combinations before any computation.

        Errors:
        ConfigError: Thrown for an unknown command, impossible sampler settings, a bad
                    nu scheme, or a missing required parameter for the command.
        """
        if self.command not in COMMANDS:
            raise ConfigError(f'unknown command {self.command!r}')
        if self.log_level not in (0, 1, 2):
            raise ConfigError(f'log_level must be 0, 1 or 2, got {self.log_level}')
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f'threads must be >= 1, got {self.threads}')
        if self.command in ('fit', 'forecast', 'simulate', 'study'):
            self.sampler()
            self.scheme()
        if self.p is not None and self.p < 1:
            raise ConfigError(f'p must be >= 1, got {self.p}')
        try:
            # the manifest records the canonical form
            self.transform = ingest.SeriesTransform.parse(self.transform).to_text()
        except DomainError as e:
            raise ConfigError(str(e)) from e

        if self.command in ('fit', 'forecast') and not self.data:
            raise ConfigError(f'{self.command} needs a data file (data: or --data)')
        if self.data and self.command in ('fit', 'forecast') and not os.path.exists(self.data):
            raise ConfigError(f'data file {self.data} does not exist')
        if self.command == 'forecast':
            if self.p is None:
                raise ConfigError('forecast needs an explicit lag order (p: or --p)')
            if self.window is None:
                raise ConfigError('forecast needs a rolling window length (window: or --window)')
            if self.window < self.p + 2:
                raise ConfigError(f'window {self.window} must be at least p + 2 = {self.p + 2}')
            if self.n_draws is not None and self.n_draws > self.sampler().retained:
                raise ConfigError(f'n_draws {self.n_draws} exceeds the {self.sampler().retained} retained draws')
        if self.command == 'simulate':
            if self.m < 1 or self.T < 1:
                raise ConfigError('simulate needs m >= 1 and T >= 1')
            if self.nu_true is not None and self.nu_true < self.m:
                raise ConfigError(f'nu_true {self.nu_true} must be >= m={self.m}')
        if self.command == 'study':
            if self.preset not in ('desk', 'full'):
                raise ConfigError(f"preset must be 'desk' or 'full', got {self.preset!r}")
            if self.replications is not None and self.replications < 1:
                raise ConfigError('replications must be >= 1')
        if self.command == 'verify' and min(self.verify_m_max, self.verify_k_max, self.verify_c_max) < 2:
            raise ConfigError('verify ranges need verify_m_max, verify_k_max, verify_c_max >= 2')
        return self


def split_list(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [str(item).strip() for item in text]
    items = [item.strip() for item in str(text).split(',')]
    return [item for item in items if item] or None


def field_types():
    return {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, value, kind):
    if value is None:
        return None
    try:
        if kind is bool:
            if isinstance(value, str):
                if value.lower() not in ('true', 'false', 'yes', 'no', '1', '0'):
                    raise ValueError(value)
                return value.lower() in ('true', 'yes', '1')
            return bool(value)
        if kind in (int, float):
            return kind(value)
        if kind is str and isinstance(value, (list, tuple)):
            return ','.join(str(item) for item in value)
        return str(value) if kind is str else value
    except (TypeError, ValueError) as e:
        raise ConfigError(f'{name}: cannot read {value!r} as {kind.__name__}') from e


def load_config_file(path):
    """
    Reads a flat YAML mapping of RunConfig keys.

    Errors:
    ConfigError: Thrown for unreadable files, nested values or unknown keys.
    """
    try:
        with open(path, 'r') as infile:
            content = yaml.safe_load(infile) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f'cannot read config file {path}: {e}') from e
    if not isinstance(content, dict):
        raise ConfigError(f'config file {path} must hold a flat key: value mapping')
    types = field_types()
    unknown = sorted(set(content) - set(types))
    if unknown:
        raise ConfigError(f'unknown keys in {path}: {", ".join(unknown)}')
    resolved = {}
    for key, value in content.items():
        if isinstance(value, dict):
            raise ConfigError(f'{key}: nested values are not supported')
        resolved[key] = _coerce(key, value, types[key])
    return resolved


def resolve(command, config_path=None, overrides=None):
    """
    Builds the RunConfig for a command: defaults < config file < overrides.

    Overrides whose value is None are ignored, so unset command-line flags never mask
    the file.
    """
    values = {}
    if config_path:
        values.update(load_config_file(config_path))
    types = field_types()
    for key, value in (overrides or {}).items():
        if value is not None and key in types:
            values[key] = _coerce(key, value, types[key])
    values['command'] = command
    if command == 'study' and values.get('preset', 'desk') == 'desk':
        for key, value in DESK_SAMPLER.items():
            values.setdefault(key, value)
    return RunConfig(**values).validate()
