import configparser
import logging
import os
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from SpecLab.Geometry.Geometry import DEFAULT_NODE_BUDGET, FamilySpec
from SpecLab.Utility.Errors import ConfigError, SpecLabError
from SpecLab.Utility.Utility import parse_float_list, spacings_from_inverse

WORKERS_ENV = 'SPECLAB_WORKERS'
DEFAULT_RESOLUTIONS = '64,128'
DEFAULT_K = 5

SWEEP_KEYS = ('k', 'res', 'workers', 'seed', 'alpha', 'format', 'out', 'plots')
FAMILY_KEYS = ('kind', 'dim', 'shape', 'normalize', 'values', 'k', 'res', 'alpha')
OUTPUT_FORMATS = ('csv', 'jsonl')

#----------------------------------------------

@dataclass(frozen=True)
class Settings:
    """Numerical tunables shared by sweeps and verification."""
    node_budget: int = DEFAULT_NODE_BUDGET
    solver_tol: float = 1e-8
    seed: int = 0
    block_padding: int = 5
    dense_limit: int = 400
    tolerance_rel: float = 1e-3         # floor of the per-eigenvalue tolerance, relative to λ_k(B)
    ab_tolerance: float = 0.01
    linf_slack: float = 0.05
    stability_factor: float = 3.0
    exponent_floor_margin: float = 0.3
    inscribed_exponent_floor: float = 0.4
    ratio_cap: float = 10.0
    min_fit_points: int = 4
    coarse_factor: int = 4
    shell_n: int = 1
    shell_samples: int = 32
    alpha: Optional[float] = None
    surgery: bool = True
    inclusion_check: bool = True
    workers: int = 1


@dataclass
class FamilyJob:
    name: str
    spec: FamilySpec
    values: list
    k: int = DEFAULT_K
    resolutions: list = field(default_factory=lambda: spacings_from_inverse(DEFAULT_RESOLUTIONS))
    alpha: Optional[float] = None


@dataclass
class SweepConfig:
    settings: Settings
    jobs: list
    format: str = 'csv'
    out: Optional[str] = None
    plots: bool = False

#----------------------------------------------

def parse_bool(text):
    value = str(text).strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f'not a boolean: {text!r}')


def _parse_optional_float(text):
    return None if str(text).strip().lower() in ('', 'none', 'default') else float(text)


def _setting_parser(name):
    default = Settings.__dataclass_fields__[name].default
    if name == 'alpha':
        return _parse_optional_float
    if isinstance(default, bool):
        return parse_bool
    if isinstance(default, int):
        return int
    return float


def resolve_workers(requested=None):
    """The worker count, with SPECLAB_WORKERS taking precedence over the request."""
    env = os.environ.get(WORKERS_ENV)
    if env is not None and env.strip():
        try:
            workers = int(env)
        except ValueError:
            raise ConfigError(f'{WORKERS_ENV} must be an integer, got {env!r}') from None
        logging.info(f'{WORKERS_ENV}={workers} overrides the requested worker count')
    else:
        workers = 1 if requested is None else int(requested)
    if workers < 1:
        raise ConfigError(f'Worker count must be at least 1, got {workers}')
    return workers


def _value(section, key, convert):
    text = section[key]
    try:
        return convert(text)
    except (ValueError, SpecLabError) as err:
        raise ConfigError(f'[{section.name}] {key} = {text!r}: {err}') from None


def load_config(path, settings=None):
    """
    Reads a sweep configuration file.

    [sweep] holds run-wide keys, [settings] overrides Settings fields and each
    [family.<name>] section describes one family. Comma lists are used for
    values, res (as 1/h) and shape.

    Raises:
        ConfigError: for unreadable files, unknown sections or keys and bad values
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        if not parser.read(path, encoding='utf-8'):
            raise ConfigError(f'Cannot read config file {path}')
    except configparser.Error as err:
        raise ConfigError(f'{path}: {err}') from None
    if parser.defaults():
        raise ConfigError('[DEFAULT] section is not supported')

    settings = settings or Settings()
    sweep = {'k': DEFAULT_K, 'res': spacings_from_inverse(DEFAULT_RESOLUTIONS), 'alpha': None,
             'format': 'csv', 'out': None, 'plots': False}
    family_sections = []

    for name in parser.sections():
        section = parser[name]
        if name == 'sweep':
            for key in section:
                if key not in SWEEP_KEYS:
                    raise ConfigError(f'Unknown key "{key}" in [sweep]')
            if 'k' in section:
                sweep['k'] = _value(section, 'k', int)
            if 'res' in section:
                sweep['res'] = _value(section, 'res', spacings_from_inverse)
            if 'alpha' in section:
                sweep['alpha'] = _value(section, 'alpha', _parse_optional_float)
            if 'format' in section:
                sweep['format'] = section['format'].strip()
                if sweep['format'] not in OUTPUT_FORMATS:
                    raise ConfigError(f'[sweep] format must be one of {OUTPUT_FORMATS}')
            if 'out' in section:
                sweep['out'] = section['out'].strip() or None
            if 'plots' in section:
                sweep['plots'] = _value(section, 'plots', parse_bool)
            if 'workers' in section:
                settings = replace(settings, workers=_value(section, 'workers', int))
            if 'seed' in section:
                settings = replace(settings, seed=_value(section, 'seed', int))
        elif name == 'settings':
            known = {f.name for f in fields(Settings)}
            updates = {}
            for key in section:
                if key not in known:
                    raise ConfigError(f'Unknown key "{key}" in [settings]')
                updates[key] = _value(section, key, _setting_parser(key))
            settings = replace(settings, **updates)
        elif name.startswith('family.') and len(name) > len('family.'):
            for key in section:
                if key not in FAMILY_KEYS:
                    raise ConfigError(f'Unknown key "{key}" in [{name}]')
            family_sections.append(section)
        else:
            raise ConfigError(f'Unknown section [{name}]')

    jobs = []
    for section in family_sections:
        if 'kind' not in section or 'values' not in section:
            raise ConfigError(f'[{section.name}] needs both "kind" and "values"')
        try:
            spec = FamilySpec(section['kind'].strip(),
                              _value(section, 'dim', int) if 'dim' in section else 2,
                              tuple(_value(section, 'shape', parse_float_list)) if 'shape' in section else (),
                              _value(section, 'normalize', parse_bool) if 'normalize' in section else None)
        except SpecLabError as err:
            raise ConfigError(f'[{section.name}]: {err}') from None
        jobs.append(FamilyJob(
            name=section.name[len('family.'):],
            spec=spec,
            values=_value(section, 'values', parse_float_list),
            k=_value(section, 'k', int) if 'k' in section else sweep['k'],
            resolutions=_value(section, 'res', spacings_from_inverse) if 'res' in section else sweep['res'],
            alpha=_value(section, 'alpha', _parse_optional_float) if 'alpha' in section else sweep['alpha'],
        ))
    if not jobs:
        raise ConfigError(f'{path} defines no [family.<name>] section')
    logging.info(f'Loaded {len(jobs)} family job(s) from {path}')
    return SweepConfig(settings, jobs, sweep['format'], sweep['out'], sweep['plots'])
