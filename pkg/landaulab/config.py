"""Layered experiment configuration.

Defaults come from ``config/experiment.yaml`` in the package, overridden
by ``/etc/landaulab`` and ``$XDG_CONFIG_HOME/landaulab``; the experiment
file named on the command line is merged last and validated by
:class:`ExperimentConfig`.
"""
from __future__ import annotations

import collections.abc
import copy
import json
import logging
import os
from typing import Any, Callable, NamedTuple

import numpy as np
import yaml

from . import equilibria
from .errors import GridError, ParameterError
from .gevrey import GevreySchedule
from .grid import PhaseGrid
from .volterra import GaussianPerturbation

log = logging.getLogger(__name__)


class ConfigError(Exception):
    pass


def load_config(configuration_file):
    """Load a landaulab configuration file.

    Args:
        configuration_file (str): name of configuration file.  Name is
        relative to config directory so typically just a file name
        without paths, e.g. "experiment.yaml".
    """
    res = None

    for dirname in __config_file_paths():
        path = os.path.join(dirname, configuration_file)
        new_config = None
        if os.path.isfile(path):
            try:
                with open(path, 'r') as config:
                    new_config = yaml.safe_load(config.read())
            except yaml.YAMLError as err:
                raise ConfigError('Config file %s: failed to parse: %s' % (path, err))
        if res is None:
            if new_config is None:
                raise ConfigError('Base configuration file %s not found in %s'
                                  % (configuration_file, path))
            res = new_config
        elif new_config is not None:
            __update_dict(res, new_config)

    return res


def __config_file_paths():
    """
    Paths in which to look for config files, by increasing order of
    priority (i.e., any config in the last path should take precedence
    over the others).
    """
    return [os.path.join(os.path.dirname(__file__), 'config'),
            os.path.join('/etc', 'landaulab'),
            os.path.join(os.environ.get('XDG_CONFIG_HOME',
                                        os.path.join(os.path.expanduser('~'), '.config')),
                         'landaulab')]


def __update_dict(orig, update):
    """Deep update of a dictionary

    For each entry (k, v) in update such that both orig[k] and v are
    dictionaries, orig[k] is recursively updated to v.

    For all other entries (k, v), orig[k] is set to v.
    """
    for (key, value) in update.items():
        if (key in orig and
            isinstance(value, collections.abc.Mapping) and
            isinstance(orig[key], collections.abc.Mapping)):
            __update_dict(orig[key], value)
        else:
            orig[key] = value


EXPERIMENTS = ('simulate', 'volterra', 'penrose', 'echo', 'kernel-sweep')

# Sections an experiment file must provide itself; defaults only fill in keys.
_MANDATORY_SECTIONS = {
    'simulate': ('grid', 'equilibrium', 'interaction', 'run'),
    'volterra': ('grid', 'equilibrium', 'interaction', 'run'),
    'penrose': ('equilibrium', 'interaction', 'stability'),
    'echo': ('grid', 'equilibrium', 'interaction', 'echo'),
    'kernel-sweep': ('sweep',),
}

_EQUILIBRIA = ('maxwellian', 'two-stream', 'custom')
_INTERACTIONS = ('coulomb', 'newton', 'free')


class _Rule(NamedTuple):
    kind: str
    check: Callable[[Any], bool] | None = None
    message: str = ''
    nullable: bool = False


def _power_of_two(n) -> bool:
    return n >= 8 and n & (n - 1) == 0


def _positive(x) -> bool:
    return x > 0


def _unit_interval(x) -> bool:
    return 0 < x < 1


_RULES: dict[str, dict[str, _Rule]] = {
    'grid': {
        'd': _Rule('int', lambda v: v == 1, 'only d = 1 is supported'),
        'Nx': _Rule('int', _power_of_two, 'must be a power of two >= 8'),
        'Nv': _Rule('int', _power_of_two, 'must be a power of two >= 8'),
        'V': _Rule('float', _positive, 'must be positive'),
    },
    'equilibrium': {
        'kind': _Rule('str', lambda v: v in _EQUILIBRIA, f'must be one of {_EQUILIBRIA}'),
        'theta': _Rule('float', _positive, 'must be positive'),
        'v0': _Rule('float'),
        'table': _Rule('str', nullable=True),
    },
    'interaction': {
        'kind': _Rule('str', lambda v: v in _INTERACTIONS, f'must be one of {_INTERACTIONS}'),
        'A': _Rule('float', lambda v: v >= 0, 'must be >= 0'),
        'gamma': _Rule('float', lambda v: v >= 1, 'must be >= 1'),
    },
    'gevrey': {
        's': _Rule('float', _unit_interval, 'must lie in (0, 1)'),
        'lambda0': _Rule('float', _positive, 'must be positive'),
        'lambda_prime': _Rule('float', _positive, 'must be positive'),
        'sigma': _Rule('float', lambda v: v >= 0, 'must be >= 0'),
        'beta': _Rule('float', lambda v: v > 2, 'must exceed 2'),
        'M': _Rule('int', lambda v: v >= 1, 'must be >= 1'),
        'log_cap': _Rule('float', _positive, 'must be positive'),
    },
    'run': {
        'horizon': _Rule('float', _positive, 'must be positive'),
        'dt': _Rule('float', _positive, 'must be positive', nullable=True),
        'eps': _Rule('float', lambda v: v >= 0, 'must be >= 0'),
        'linearized': _Rule('bool'),
        'filter_strength': _Rule('float', _positive, 'must be positive', nullable=True),
        'boundary_tol': _Rule('float', _positive, 'must be positive'),
        'diagnostics': _Rule('bool'),
        'snapshot_every': _Rule('int', lambda v: v >= 0, 'must be >= 0'),
        'profile': _Rule('bool'),
        'perturbation': _Rule('dict'),
    },
    'stability': {
        'lambda_bar': _Rule('float', _positive, 'must be positive'),
        'k_max': _Rule('int', lambda v: v >= 1, 'must be >= 1'),
        'Z': _Rule('float', _positive, 'must be positive'),
        'mu_min': _Rule('float'),
        'n_mu': _Rule('int', lambda v: v >= 2, 'must be >= 2'),
        'n_zeta': _Rule('int', lambda v: v >= 3, 'must be >= 3'),
        'kappa_min': _Rule('float', lambda v: v >= 0, 'must be >= 0'),
        'winding': _Rule('bool'),
        'roots': _Rule('bool'),
    },
    'echo': {
        'k': _Rule('int', lambda v: v >= 1, 'must be >= 1'),
        'l': _Rule('int', lambda v: v >= 2, 'must be >= 2'),
        'tau_kick': _Rule('float', _positive, 'must be positive'),
        'eps': _Rule('float', lambda v: v >= 0, 'must be >= 0'),
        'kick_ratio': _Rule('float', _positive, 'must be positive'),
        'horizon': _Rule('float', _positive, 'must be positive', nullable=True),
        'dt': _Rule('float', _positive, 'must be positive'),
        'theta': _Rule('float', _positive, 'must be positive'),
    },
    'sweep': {
        's': _Rule('list', lambda v: len(v) > 0, 'must be a non-empty list'),
        'horizons': _Rule('list', lambda v: len(v) > 0, 'must be a non-empty list'),
        'k_max': _Rule('int', lambda v: v >= 1, 'must be >= 1'),
        'l_max': _Rule('int', lambda v: v >= 1, 'must be >= 1'),
        'lambda0': _Rule('float', _positive, 'must be positive'),
        'lambda_prime': _Rule('float', _positive, 'must be positive'),
        'a0': _Rule('float', _positive, 'must be positive'),
        'c': _Rule('float', _unit_interval, 'must lie in (0, 1)'),
        'delta': _Rule('float', _positive, 'must be positive', nullable=True),
        'per_decade': _Rule('int', lambda v: v >= 1, 'must be >= 1'),
    },
    'output': {
        'dir': _Rule('str'),
    },
}

_TOP_LEVEL = {
    'experiment': _Rule('str', lambda v: v in EXPERIMENTS, f'must be one of {EXPERIMENTS}'),
    'seed': _Rule('int', lambda v: v >= 0, 'must be >= 0'),
}


def _coerce(key: str, value: Any, rule: _Rule) -> Any:
    if value is None:
        if rule.nullable:
            return None
        raise ConfigError(f'{key}: missing value')
    try:
        if rule.kind == 'float':
            if isinstance(value, bool):
                raise TypeError
            value = float(value)
            if not np.isfinite(value):
                raise TypeError
        elif rule.kind == 'int':
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise TypeError
            value = int(float(value))
        elif rule.kind == 'bool':
            if not isinstance(value, bool):
                raise TypeError
        elif rule.kind == 'str':
            if not isinstance(value, str):
                raise TypeError
        elif rule.kind == 'list':
            if not isinstance(value, list):
                raise TypeError
        elif rule.kind == 'dict':
            if not isinstance(value, dict):
                raise TypeError
    except (TypeError, ValueError):
        raise ConfigError(f'{key}: expected {rule.kind}, got {value!r}')
    if rule.check is not None and not rule.check(value):
        raise ConfigError(f'{key}: {rule.message}, got {value!r}')
    return value


def _read_user_file(path: str) -> dict:
    try:
        with open(path, 'r') as src:
            if path.endswith('.json'):
                data = json.load(src)
            else:
                data = yaml.safe_load(src.read())
    except OSError as err:
        raise ConfigError(f'Config file {path}: {err.strerror}')
    except (yaml.YAMLError, json.JSONDecodeError) as err:
        raise ConfigError(f'Config file {path}: failed to parse: {err}')
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f'Config file {path}: top level must be a mapping')
    # A manifest carries the resolved config under 'config'
    if isinstance(data.get('config'), dict) and 'version' in data:
        data = data['config']
    return data


def load_experiment(path: str, experiment: str | None = None) -> ExperimentConfig:
    """Read an experiment file (or a manifest), merge it over the defaults and validate.

    Raises:
        ConfigError: unreadable file, missing section or invalid value; the
            message starts with the offending key.
    """
    user = _read_user_file(path)
    named = user.get('experiment')
    if experiment is None:
        experiment = named
    elif named is not None and named != experiment:
        raise ConfigError(f'experiment: file {path} describes {named!r}, not {experiment!r}')
    if experiment not in EXPERIMENTS:
        raise ConfigError(f'experiment: must be one of {EXPERIMENTS}, got {experiment!r}')
    for section in _MANDATORY_SECTIONS[experiment]:
        if section not in user:
            raise ConfigError(f'{section}: section missing from {path}')
        if not isinstance(user[section], dict):
            raise ConfigError(f'{section}: expected a mapping')

    merged = copy.deepcopy(load_config('experiment.yaml'))
    __update_dict(merged, user)
    merged['experiment'] = experiment
    return ExperimentConfig(merged, os.path.dirname(os.path.abspath(path)))


class ExperimentConfig:
    """A validated, fully resolved experiment description.

    ``warnings`` lists unknown fields; callers report them through their
    aspect so that --werror applies.
    """

    def __init__(self, data: dict, base_dir: str = '.'):
        self.warnings: list[str] = []
        self._base_dir = base_dir
        self._data = self._validate(data)
        self.experiment: str = self._data['experiment']
        self._check_experiment()

    def _validate(self, data: dict) -> dict:
        resolved: dict[str, Any] = {}
        for key, value in data.items():
            if key in _TOP_LEVEL:
                resolved[key] = _coerce(key, value, _TOP_LEVEL[key])
            elif key in _RULES:
                if not isinstance(value, dict):
                    raise ConfigError(f'{key}: expected a mapping')
                resolved[key] = self._validate_section(key, value)
            else:
                self.warnings.append(f'Unknown field "{key}"')
        for key, rule in _TOP_LEVEL.items():
            if key not in resolved:
                raise ConfigError(f'{key}: missing value')
        for section in _RULES:
            resolved.setdefault(section, {})
            for key, rule in _RULES[section].items():
                if key not in resolved[section]:
                    resolved[section][key] = _coerce(f'{section}.{key}', None, rule)
        return resolved

    def _validate_section(self, section: str, values: dict) -> dict:
        out = {}
        for key, value in values.items():
            rule = _RULES[section].get(key)
            if rule is None:
                self.warnings.append(f'Unknown field "{section}.{key}"')
                continue
            out[key] = _coerce(f'{section}.{key}', value, rule)
        return out

    def __getitem__(self, section: str) -> dict:
        return self._data[section]

    def as_dict(self) -> dict:
        return copy.deepcopy(self._data)

    @property
    def seed(self) -> int:
        return self._data['seed']

    def _check_experiment(self) -> None:
        """Cross-field checks and eager construction of every object the experiment uses."""
        experiment = self.experiment
        if experiment in ('simulate', 'volterra', 'echo'):
            grid = self.grid()
            self.equilibrium()
            self.interaction()
            self.schedule()
        if experiment in ('simulate', 'volterra'):
            self.perturbation()
            run = self['run']
            if experiment == 'simulate' and run['dt'] is not None and run['diagnostics']:
                ratio = grid.deta / run['dt']
                if abs(ratio - round(ratio)) > 1e-9 * ratio:
                    raise ConfigError(f'run.dt: {run["dt"]} must divide deta = {grid.deta:.17g} '
                                      'when diagnostics are on')
        if experiment == 'penrose':
            self.equilibrium()
            self.interaction()
            stability = self['stability']
            if not stability['mu_min'] < stability['lambda_bar']:
                raise ConfigError(f'stability.mu_min: must be below stability.lambda_bar = '
                                  f'{stability["lambda_bar"]}, got {stability["mu_min"]}')
        if experiment == 'echo':
            echo = self['echo']
            if not echo['l'] > echo['k']:
                raise ConfigError(f'echo.l: must exceed echo.k = {echo["k"]}, got {echo["l"]}')
        if experiment == 'kernel-sweep':
            sweep = self['sweep']
            for i, s in enumerate(sweep['s']):
                sweep['s'][i] = _coerce(f'sweep.s[{i}]', s, _RULES['gevrey']['s'])
            for i, T in enumerate(sweep['horizons']):
                sweep['horizons'][i] = _coerce(f'sweep.horizons[{i}]', T, _Rule('float', lambda v: v >= 1,
                                                                                  'must be >= 1'))
            if not sweep['lambda0'] > sweep['lambda_prime']:
                raise ConfigError(f'sweep.lambda0: {sweep["lambda0"]} must exceed '
                                  f'sweep.lambda_prime = {sweep["lambda_prime"]}')
            self.schedule()

    def _build(self, section: str, factory: Callable[[], Any]) -> Any:
        try:
            return factory()
        except (ParameterError, GridError) as err:
            raise ConfigError(f'{section}: {err}')

    def grid(self) -> PhaseGrid:
        g = self['grid']
        return self._build('grid', lambda: PhaseGrid(g['Nx'], g['Nv'], g['V'], g['d']))

    def equilibrium(self) -> equilibria.Equilibrium:
        eq = self['equilibrium']
        if eq['kind'] == 'maxwellian':
            return self._build('equilibrium', lambda: equilibria.make_maxwellian(eq['theta']))
        if eq['kind'] == 'two-stream':
            return self._build('equilibrium', lambda: equilibria.make_two_stream(eq['v0'], eq['theta']))
        if eq['table'] is None:
            raise ConfigError('equilibrium.table: a custom background needs a table file')
        path = os.path.join(self._base_dir, eq['table'])
        try:
            table = np.loadtxt(path, ndmin=2)
        except (OSError, ValueError) as err:
            raise ConfigError(f'equilibrium.table: cannot read {path}: {err}')
        if table.shape[1] != 2:
            raise ConfigError(f'equilibrium.table: {path} must have two columns (v, f)')
        return self._build('equilibrium.table', lambda: equilibria.make_custom(table[:, 0], table[:, 1]))

    def interaction(self) -> equilibria.Interaction:
        w = self['interaction']
        if w['kind'] == 'free':
            return equilibria.free_transport()
        make = equilibria.coulomb if w['kind'] == 'coulomb' else equilibria.newton
        return self._build('interaction', lambda: make(w['A'], w['gamma']))

    def schedule(self) -> GevreySchedule:
        g = self['gevrey']
        gamma = self['interaction']['gamma']
        return self._build('gevrey', lambda: GevreySchedule(g['s'], g['lambda0'], g['lambda_prime'],
                                                            g['sigma'], g['beta'], g['M'], gamma))

    def perturbation(self) -> GaussianPerturbation:
        """Initial data eps * sum_k a_k cos(k x) M_theta(v) from ``run.perturbation``."""
        pert = self['run']['perturbation']
        theta = _coerce('run.perturbation.theta', pert.get('theta', 1.0), _RULES['equilibrium']['theta'])
        modes = pert.get('modes') or {}
        if not isinstance(modes, dict):
            raise ConfigError('run.perturbation.modes: expected a mapping of mode to amplitude')
        amplitudes = {}
        for k, a in modes.items():
            key = f'run.perturbation.modes.{k}'
            k = _coerce(key, k, _Rule('int', lambda v: v >= 1, 'mode must be a positive integer'))
            amplitudes[k] = _coerce(key, a, _Rule('float'))
        for key in pert:
            message = f'Unknown field "run.perturbation.{key}"'
            if key not in ('theta', 'modes') and message not in self.warnings:
                self.warnings.append(message)
        data = self._build('run.perturbation', lambda: GaussianPerturbation(amplitudes, theta))
        # integer mode keys, so a manifest written from as_dict() reloads unchanged
        pert['theta'] = theta
        pert['modes'] = dict(amplitudes)
        return data.scaled(self['run']['eps'])
