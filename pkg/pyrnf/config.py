# (C) The pyRNF authors, 2023
#
# This file is part of pyRNF.
#
# pyRNF is free software: you can redistribute it and/or modify it under
# the terms of the GNU General Public License version 3 as published by the
# Free Software Foundation.
#
# pyRNF is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with pyRNF. If not, see <http://www.gnu.org/licenses/>.
"""
Experiment configuration

An experiment is configured by a JSON document. :data:`DEFAULT_CONFIG`
holds every key with its default; :func:`load_config` merges a user file
and command line overrides on top of it and validates the result. The
merged configuration is written to every run manifest so that a run can
be replayed from its manifest alone.
"""

import copy
import json
import logging

from pyrnf.exceptions import ConfigurationError

SCHEMA = 1

MODEL_DEFAULTS = {
    '1': {'sigma_r': 0.5, 'sigma_s': 0.01},
    '2': {'sigma_r': 0.5, 'sigma_s': 0.01},
    '3': {'sigma_r': 0.01, 'sigma_s': 0.01},
    '4': {'sigma_r': 0.5, 'sigma_s': 0.01, 'nu': 0.5},
    '5': {},
}
"""
receptive field and correlation scales of every model (the minimizers of
the regression loss grid search)
"""

DEFAULT_CONFIG = {
    'schema': SCHEMA,
    'seed': 0,
    'jobs': 1,
    'model': {
        'model_id': 1,
        'width': 2048,
        'widths': None,
        'sigma_r': 0.5,
        'sigma_s': 0.01,
        'nu': 0.5,
        'sigma_w': 1.0,
        'sigma_b': 0.1,
        'wrap_terms': 3,
        'pool_window': 2,
        'pool_stride': 2,
        'factor_method': 'auto',
    },
    'models': MODEL_DEFAULTS,
    'data': {
        'dir': None,
        'split': 'train',
        'n_train': 80,
        'n_val': 20,
    },
    'train': {
        'steps': 100000,
        'eta_mode': 'auto',
        'eta': None,
        'log_points': 60,
        'batch_size': None,
        'divergence_threshold': 1e6,
        'discrete': False,
        'widths': [128, 512, 2048],
        'best_cell': None,
    },
    'kernel': {
        'mode': 'full',
    },
    'regress': {
        'models': [1, 2, 3, 4, 5],
        'n_train': 800,
        'n_test': 200,
        'trials': 5,
    },
    'grid': {
        'sigma_r': [0.01, 0.05, 0.1, 0.5, 1.0],
        'sigma_s': [0.01, 0.05, 0.1, 0.5, 1.0],
        'metrics': ['loss', 'distance'],
        'n_train': 800,
        'n_test': 200,
        'n_references': 10,
        'trials': 5,
    },
    'perturbation': {
        'kind': 'translate_elastic',
        'max_shift': 2,
        'alpha_range': [1.0, 3.0],
        'sigma_def': 4.0,
        'count': 50,
        'seed': 0,
    },
    'stability': {
        'models': [1, 2, 3, 4, 5],
        'kinds': ['translate_elastic', 'elastic'],
        'n_references': 10,
        'trials': 5,
    },
    'noise': {
        'models': [1, 2, 3, 4, 5],
        'levels': [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        'n_train': 800,
        'n_test': 200,
        'trials': 5,
    },
    'sample': {
        'layer': 0,
    },
}

_CHOICES = {
    ('model', 'factor_method'): ('auto', 'quadrature', 'cholesky'),
    ('train', 'eta_mode'): ('auto', 'fixed'),
    ('kernel', 'mode'): ('full', 'trace'),
    ('data', 'split'): ('train', 'test'),
    ('perturbation', 'kind'): ('noise', 'translate', 'elastic',
                               'translate_elastic'),
}

_POSITIVE = (
    ('model', 'width'), ('model', 'sigma_r'), ('model', 'sigma_s'),
    ('model', 'nu'), ('model', 'wrap_terms'), ('model', 'pool_window'),
    ('model', 'pool_stride'), ('train', 'steps'), ('regress', 'trials'),
    ('regress', 'n_train'), ('noise', 'trials'), ('stability', 'trials'),
    ('grid', 'trials'), ('perturbation', 'count'), ('jobs', ),
)


def merge(base, update, free=False):
    """
    recursively merge the dict update into a deep copy of base

    Keys missing from base are rejected unless free is set (the per-model
    table).
    """
    ret = copy.deepcopy(base)
    for key, value in update.items():
        if key not in ret and not free:
            raise ConfigurationError("unknown configuration key '{}'".format(
                key))
        if isinstance(value, dict) and isinstance(ret.get(key), dict):
            ret[key] = merge(ret[key], value,
                             free=free or key == 'models')
        else:
            ret[key] = copy.deepcopy(value)
    return ret


def set_path(config, path, value):
    """
    set a dotted key, e.g. ``set_path(config, 'model.width', 512)``
    """
    keys = path.split('.')
    target = config
    for key in keys[:-1]:
        if not isinstance(target.get(key), dict):
            raise ConfigurationError("unknown configuration key '{}'".format(
                path))
        target = target[key]
    if keys[-1] not in target:
        raise ConfigurationError("unknown configuration key '{}'".format(
            path))
    target[keys[-1]] = value


def _get(config, path):
    value = config
    for key in path:
        value = value[key]
    return value


def validate(config):
    """
    check kinds and ranges of a merged configuration

    Raises:

        :class:`pyrnf.exceptions.ConfigurationError`
    """
    if config.get('schema') != SCHEMA:
        raise ConfigurationError('configuration schema {} not supported'
                                 .format(config.get('schema')))
    for path, choices in _CHOICES.items():
        if _get(config, path) not in choices:
            raise ConfigurationError('{} must be one of {}, got {!r}'.format(
                '.'.join(path), choices, _get(config, path)))
    for path in _POSITIVE:
        value = _get(config, path)
        if isinstance(value, bool) or not isinstance(value, (int, float)) \
                or value <= 0:
            raise ConfigurationError('{} must be a positive number, got '
                                     '{!r}'.format('.'.join(path), value))
    if config['model']['model_id'] not in (1, 2, 3, 4, 5):
        raise ConfigurationError('model.model_id must be in 1..5')
    for section in ('regress', 'noise', 'stability'):
        if not set(config[section]['models']) <= {1, 2, 3, 4, 5}:
            raise ConfigurationError('{}.models must be in 1..5'.format(
                section))
    for key in config['models']:
        if key not in MODEL_DEFAULTS:
            raise ConfigurationError("models has no entry '{}'".format(key))
    widths = config['model']['widths']
    if widths is not None and (len(widths) != 3 or min(widths) < 1):
        raise ConfigurationError('model.widths needs three positive widths')
    if config['train']['eta_mode'] == 'fixed' and \
            config['train']['eta'] is None:
        raise ConfigurationError('train.eta is required for eta_mode fixed')
    if any(level < 0 for level in config['noise']['levels']):
        raise ConfigurationError('noise levels must be non-negative')
    if not set(config['grid']['metrics']) <= {'loss', 'distance'}:
        raise ConfigurationError('grid.metrics must be loss and/or distance')
    return config


def load_config(path=None, overrides=None):
    """
    the effective configuration of an experiment

    Kwargs:

    * path (str):
        a JSON file with (a subset of) the keys of :data:`DEFAULT_CONFIG`

    * overrides (dict):
        dotted keys and values applied last, e.g. ``{'model.width': 512}``

    Returns:

        dict
    """
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        logging.debug('reading configuration {}'.format(path))
        try:
            with open(path) as fh:
                user = json.load(fh)
        except ValueError as err:
            raise ConfigurationError('cannot parse {}: {}'.format(path, err))
        if not isinstance(user, dict):
            raise ConfigurationError('{} does not hold a JSON object'.format(
                path))
        config = merge(config, user)
    for key, value in sorted((overrides or {}).items()):
        set_path(config, key, value)
    return validate(config)


def model_kwargs(config, model_id=None, per_model=True, **updates):
    """
    keyword arguments of :func:`pyrnf.network.build_model` for a model

    With per_model the scales of the models table are applied on top of
    the model section.
    """
    section = config['model']
    model_id = section['model_id'] if model_id is None else model_id
    kwargs = {
        'widths': section['widths'] or section['width'],
        'sigma_r': section['sigma_r'], 'sigma_s': section['sigma_s'],
        'nu': section['nu'], 'sigma_w': section['sigma_w'],
        'sigma_b': section['sigma_b'], 'wrap_terms': section['wrap_terms'],
        'pool_window': section['pool_window'],
        'pool_stride': section['pool_stride'],
        'factor_method': section['factor_method'],
    }
    if per_model:
        kwargs.update(config['models'].get(str(model_id), {}))
    kwargs.update(updates)
    return kwargs
