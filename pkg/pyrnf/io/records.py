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
Persistence of experiment results, model checkpoints and kernels

Every command writes its tables as CSV files with a header row and a
``manifest.json`` (schema 1) holding the effective configuration, the
seeds, the code version and everything needed to replay the run.
"""

import csv
import datetime
import json
import logging
import os
import subprocess

import numpy as np

import pyrnf
from pyrnf.exceptions import DataFormatError

SCHEMA = 1
MANIFEST = 'manifest.json'


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError('{!r} is not JSON serializable'.format(obj))


def git_describe():
    """
    ``git describe`` of the source tree, or the package version outside of
    a git checkout
    """
    try:
        out = subprocess.run(
            ['git', 'describe', '--always', '--dirty', '--tags'],
            cwd=os.path.dirname(os.path.abspath(pyrnf.__file__)),
            stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, check=True)
    except (OSError, subprocess.CalledProcessError):
        return 'pyrnf-{}'.format(pyrnf.__version__)
    return out.stdout.decode('utf-8').strip()


class ExperimentRecord(object):

    """
    The results of one command invocation
    """

    def __init__(self, command, config, seeds=None):
        """
        Args:

        * command (str):
            name of the command that produced the record

        * config (dict):
            effective merged configuration

        Kwargs:

        * seeds (dict):
            root seed and derived component seeds
        """
        self.command = command
        self.config = config
        self.seeds = seeds or {}
        self.tables = {}
        self.extra = {}
        self.ridge = {}
        self.timings = {}
        self.started = datetime.datetime.utcnow()

    def __repr__(self):
        return "<pyrnf 'ExperimentRecord' {} ({} tables)>".format(
            self.command, len(self.tables))

    def add_table(self, name, columns, rows):
        self.tables[name] = (list(columns), [list(row) for row in rows])

    def manifest(self):
        return {
            'schema': SCHEMA,
            'command': self.command,
            'config': self.config,
            'seeds': self.seeds,
            'code': git_describe(),
            'version': pyrnf.__version__,
            'started': self.started.strftime('%Y-%m-%dT%H:%M:%S'),
            'ridge': self.ridge,
            'timings': self.timings,
            'tables': {name: name + '.csv' for name in sorted(self.tables)},
            'extra': self.extra,
        }


def write_table(path, columns, rows):
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(float(value)) if isinstance(
                value, (float, np.floating)) else value for value in row])


def read_table(path):
    """
    read a CSV table written by :func:`write_table`

    Returns:

        (columns, rows) with numeric cells converted to float
    """
    def convert(cell):
        try:
            return float(cell)
        except ValueError:
            return cell

    with open(path, newline='') as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [[convert(cell) for cell in row] for row in reader]
    return columns, rows


def write_record(record, out_dir):
    """
    write all tables and the manifest of a record

    Args:

    * record (:class:`ExperimentRecord`):
        the results

    * out_dir (str):
        output directory, created if missing

    Returns:

        dict of table name (and 'manifest') to path
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for name, (columns, rows) in sorted(record.tables.items()):
        paths[name] = os.path.join(out_dir, name + '.csv')
        write_table(paths[name], columns, rows)
    paths['manifest'] = os.path.join(out_dir, MANIFEST)
    with open(paths['manifest'], 'w') as fh:
        json.dump(record.manifest(), fh, indent=2, sort_keys=True,
                  default=_json_default)
    logging.info('wrote {} tables to {}'.format(len(record.tables), out_dir))
    return paths


def read_manifest(path):
    """
    read a manifest (or the manifest of a run directory)

    Returns:

        dict
    """
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST)
    with open(path) as fh:
        try:
            manifest = json.load(fh)
        except ValueError as err:
            raise DataFormatError('{} is not valid JSON: {}'.format(
                path, err))
    if manifest.get('schema') != SCHEMA:
        raise DataFormatError('{} has schema {}, expected {}'.format(
            path, manifest.get('schema'), SCHEMA))
    return manifest


def save_checkpoint(net, path):
    """
    store a network as ``<path>.npz`` with a JSON header ``<path>.json``

    The arrays round-trip bit-exactly.
    """
    arrays = {}
    for index, _, bundle in net.dense_layers():
        arrays['W_tilde_{}'.format(index)] = bundle.W_tilde
        arrays['R_{}'.format(index)] = bundle.R
        arrays['beta_{}'.format(index)] = bundle.beta
    np.savez(path + '.npz', **arrays)
    header = {
        'schema': SCHEMA,
        'layers': [spec.to_dict() for spec in net.layers],
        'scales': [None if bundle is None else
                   [bundle.sigma_w, bundle.sigma_b]
                   for bundle in net.params],
        'settings': net.settings,
        'seed': net.seed,
        'params_hash': net.params_hash(),
    }
    with open(path + '.json', 'w') as fh:
        json.dump(header, fh, indent=2, default=_json_default)
    return path + '.npz', path + '.json'


def load_checkpoint(path):
    """
    read a network written by :func:`save_checkpoint`

    Returns:

        :class:`pyrnf.network.NetworkModel`
    """
    from pyrnf.fields import WeightBundle
    from pyrnf.network import LayerSpec, NetworkModel

    with open(path + '.json') as fh:
        header = json.load(fh)
    if header.get('schema') != SCHEMA:
        raise DataFormatError('checkpoint {} has schema {}'.format(
            path, header.get('schema')))
    layers = [LayerSpec.from_dict(layer) for layer in header['layers']]
    params = []
    with np.load(path + '.npz') as arrays:
        for index, (spec, scales) in enumerate(zip(layers,
                                                   header['scales'])):
            if not spec.is_dense:
                params.append(None)
                continue
            params.append(WeightBundle(
                arrays['W_tilde_{}'.format(index)],
                arrays['R_{}'.format(index)],
                arrays['beta_{}'.format(index)], *scales))
    net = NetworkModel(layers, params, header['seed'], header['settings'])
    if net.params_hash() != header['params_hash']:
        raise DataFormatError('checkpoint {} is corrupt'.format(path))
    return net


def save_kernel(kernel, path, meta=None):
    """
    store a tangent kernel as ``<path>.npy`` with a JSON sidecar
    ``<path>.json``

    Kwargs:

    * meta (dict):
        extra sidecar entries, e.g. the model settings hash and seed
    """
    np.save(path + '.npy', kernel.entries)
    sidecar = dict(kernel.meta())
    sidecar.update(meta or {})
    sidecar['schema'] = SCHEMA
    with open(path + '.json', 'w') as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True,
                  default=_json_default)
    return path + '.npy', path + '.json'


def load_kernel(path):
    """
    Returns:

        (:class:`pyrnf.tangent.TangentKernel`, sidecar dict)
    """
    from pyrnf.tangent import TangentKernel

    with open(path + '.json') as fh:
        sidecar = json.load(fh)
    entries = np.load(path + '.npy')
    kernel = TangentKernel(entries, sidecar['n_rows'], sidecar['n_cols'],
                           sidecar['n_classes'], sidecar['mode'])
    return kernel, sidecar
