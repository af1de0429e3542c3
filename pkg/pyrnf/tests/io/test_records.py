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

import numpy as np
from numpy.testing import assert_array_equal

from pyrnf.exceptions import DataFormatError
from pyrnf.io.records import (ExperimentRecord, load_checkpoint, load_kernel,
                              read_manifest, read_table, save_checkpoint,
                              save_kernel, write_record)
from pyrnf.network import build_model
from pyrnf.tangent.methods import empirical_ntk


def _tiny(model_id=2):
    return build_model(model_id, widths=(16, 12, 10), sigma_r=0.5,
                       sigma_s=0.2, seed=5, input_width=12, n_classes=3)


def test_record():
    directory = tempfile.mkdtemp()
    try:
        record = ExperimentRecord('regress', {'seed': 7}, {'root': 7})
        record.add_table('summary', ('model', 'loss'),
                         [('1', 0.1), ('2', np.float64(1. / 3.))])
        record.extra['best'] = np.int64(2)
        out = os.path.join(directory, 'missing', 'run')
        paths = write_record(record, out)
        assert os.path.isfile(paths['summary'])

        manifest = read_manifest(out)
        assert manifest['command'] == 'regress'
        assert manifest['config'] == {'seed': 7}
        assert manifest['tables'] == {'summary': 'summary.csv'}
        assert manifest['extra'] == {'best': 2}
        assert manifest == read_manifest(paths['manifest'])

        columns, rows = read_table(paths['summary'])
        assert columns == ['model', 'loss']
        # floats are written with full precision
        assert rows[1][1] == 1. / 3.
    finally:
        shutil.rmtree(directory)


def test_bad_manifest():
    directory = tempfile.mkdtemp()
    try:
        path = os.path.join(directory, 'manifest.json')
        with open(path, 'w') as fh:
            json.dump({'schema': 99}, fh)
        try:
            read_manifest(path)
        except DataFormatError:
            pass
        else:
            assert False
        with open(path, 'w') as fh:
            fh.write('{')
        try:
            read_manifest(directory)
        except DataFormatError:
            pass
        else:
            assert False
    finally:
        shutil.rmtree(directory)


def test_checkpoint():
    directory = tempfile.mkdtemp()
    try:
        net = _tiny()
        path = os.path.join(directory, 'model')
        save_checkpoint(net, path)
        loaded = load_checkpoint(path)
        assert loaded.params_hash() == net.params_hash()
        assert [spec.to_dict() for spec in loaded.layers] == \
            [spec.to_dict() for spec in net.layers]
        X = np.random.default_rng(0).uniform(0., 1., (3, 12))
        assert_array_equal(loaded.predict(X), net.predict(X))

        with np.load(path + '.npz') as arrays:
            changed = dict(arrays)
        changed['beta_0'] = changed['beta_0'] + 1.
        np.savez(path + '.npz', **changed)
        try:
            load_checkpoint(path)
        except DataFormatError:
            pass
        else:
            assert False
    finally:
        shutil.rmtree(directory)


def test_kernel_file():
    directory = tempfile.mkdtemp()
    try:
        kernel = empirical_ntk(_tiny(5),
                               np.random.default_rng(1).uniform(0., 1.,
                                                                (4, 12)))
        path = os.path.join(directory, 'theta')
        save_kernel(kernel, path, {'seed': 5})
        loaded, sidecar = load_kernel(path)
        assert_array_equal(loaded.entries, kernel.entries)
        assert loaded.mode == 'full'
        assert sidecar['seed'] == 5
        assert sidecar['layout'] == 'example-major'
    finally:
        shutil.rmtree(directory)
