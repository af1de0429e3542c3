# -*- coding: utf-8 -*-

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

import json
import os
import shutil
import tempfile

from pyrnf.config import DEFAULT_CONFIG, load_config, merge, model_kwargs
from pyrnf.exceptions import ConfigurationError


def _raises(func, *args, **kwargs):
    try:
        func(*args, **kwargs)
    except ConfigurationError:
        return True
    return False


def test_defaults():
    config = load_config()
    assert config == DEFAULT_CONFIG
    assert config is not DEFAULT_CONFIG
    assert config['model']['sigma_b'] == 0.1
    assert config['perturbation']['alpha_range'] == [1.0, 3.0]


def test_overrides():
    config = load_config(overrides={'model.width': 64, 'seed': 3})
    assert config['model']['width'] == 64
    assert config['seed'] == 3
    assert DEFAULT_CONFIG['model']['width'] == 2048
    assert _raises(load_config, overrides={'model.depth': 3})
    assert _raises(load_config, overrides={'kernel.mode': 'diagonal'})
    assert _raises(load_config, overrides={'model.sigma_s': 0.})
    assert _raises(load_config, overrides={'train.eta_mode': 'fixed'})
    assert _raises(load_config, overrides={'noise.levels': [-.1]})
    assert _raises(load_config, overrides={'regress.models': [6]})


def test_config_file():
    directory = tempfile.mkdtemp()
    try:
        path = os.path.join(directory, 'config.json')
        with open(path, 'w') as fh:
            json.dump({'model': {'model_id': 3},
                       'models': {'3': {'sigma_r': 0.05}}}, fh)
        config = load_config(path, {'model.width': 32})
        assert config['model']['model_id'] == 3
        assert config['model']['width'] == 32
        assert config['models']['3'] == {'sigma_r': 0.05, 'sigma_s': 0.01}

        with open(path, 'w') as fh:
            json.dump({'models': {'7': {}}}, fh)
        assert _raises(load_config, path)
        with open(path, 'w') as fh:
            json.dump({'modle': {}}, fh)
        assert _raises(load_config, path)
        with open(path, 'w') as fh:
            fh.write('[1, 2')
        assert _raises(load_config, path)
    finally:
        shutil.rmtree(directory)


def test_merge():
    base = {'a': {'b': 1}, 'models': {'1': {'x': 1}}}
    merged = merge(base, {'a': {'b': 2}, 'models': {'1': {'y': 2}}})
    assert merged == {'a': {'b': 2}, 'models': {'1': {'x': 1, 'y': 2}}}
    assert base['a']['b'] == 1
    assert _raises(merge, base, {'a': {'c': 1}})


def test_model_kwargs():
    config = load_config(overrides={'model.sigma_r': 0.2})
    kwargs = model_kwargs(config, 3)
    assert kwargs['sigma_r'] == 0.01
    assert kwargs['widths'] == 2048
    assert model_kwargs(config, 3, per_model=False)['sigma_r'] == 0.2
    assert model_kwargs(config, 5)['sigma_r'] == 0.2
    assert model_kwargs(config, 1, widths=16)['widths'] == 16
    config = load_config(overrides={'model.widths': [8, 4, 2]})
    assert model_kwargs(config)['widths'] == [8, 4, 2]
