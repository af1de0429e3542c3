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
The experiments of pyRNF

Every command takes the effective configuration (see :mod:`pyrnf.config`)
and an output directory and returns an
:class:`pyrnf.io.records.ExperimentRecord` that is written as CSV tables
and a manifest. Sweeps run their independent cells in a process pool of
``jobs`` workers; cells receive the configuration and their coordinates
only and derive all randomness from the root seed.

==============  =========================================================
command         output
==============  =========================================================
sample          first layer weight matrix and its band diagnostics
ntk-check       gradient descent against linearized dynamics per width
regress         tangent kernel regression loss and accuracy per model
grid            sigma_r x sigma_s heatmaps of loss and relative distance
stability       relative distance under translations and deformations
noise           regression loss on noisy test inputs
fetch           download and verify the MNIST files
==============  =========================================================
"""

import hashlib
import json
import logging
import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from pyrnf import data_path
from pyrnf.config import load_config, model_kwargs, validate
from pyrnf.exceptions import (ConfigurationError, DataFormatError,
                              RNFError)
from pyrnf.fields.sampling import derive_seed
from pyrnf.io import MNIST_MD5, load_mnist, subsample
from pyrnf.io.records import (ExperimentRecord, read_manifest,
                              save_checkpoint, write_record)
from pyrnf.network import build_model
from pyrnf.network.methods import forward
from pyrnf.perturb import PerturbationSpec
from pyrnf.perturb.methods import (deformation_stability,
                                   noise_robustness_curve)
from pyrnf.tangent import LinearizedState
from pyrnf.tangent.methods import (empirical_ntk, ntk_regression,
                                   train_test_kernels)
from pyrnf.training import (TrainConfig, auto_learning_rate,
                            compare_dynamics, sgd_train)
from pyrnf.training.utils import accuracy, mse_loss

MNIST_MIRROR = 'https://ossci-datasets.s3.amazonaws.com/mnist/'
BEST_CELL = 'best_cell.json'


class ModelBuilder(object):

    """
    picklable callable seed -> NetworkModel for one model and its
    configuration
    """

    def __init__(self, model_id, kwargs):
        self.model_id = model_id
        self.kwargs = kwargs

    def __call__(self, seed):
        return build_model(self.model_id, seed=seed, **self.kwargs)


def run_cells(func, cells, jobs=1):
    """
    apply func to every cell, in a process pool for jobs > 1

    Returns:

        list of results in the order of cells
    """
    cells = list(cells)
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            return list(executor.map(func, cells))
    return [func(cell) for cell in cells]


_datasets = {}


def load_data(config):
    """
    the configured MNIST split, cached per process
    """
    key = (config['data']['split'], config['data']['dir'])
    if key not in _datasets:
        _datasets[key] = load_mnist(config['data']['split'],
                                    config['data']['dir'])
    return _datasets[key]


def _split(config, n_train, n_test, seed):
    train, test = subsample(load_data(config), n_train, n_test, seed)
    return train, test


def _trial_seed(config, trial):
    return derive_seed(config['seed'], 'trial', trial)


def _support_width(row, mass=.9):
    """
    number of presynaptic neurons carrying the given share of the squared
    weights of a row
    """
    energy = np.sort(row ** 2)[::-1]
    total = energy.sum()
    if total == 0:
        return 0
    return int(np.searchsorted(np.cumsum(energy), mass * total) + 1)


def cmd_sample(config, out):
    """
    draw a model and emit the weights of one dense layer (one row per
    postsynaptic neuron) with the lag-1 autocorrelation and the support
    width of every row
    """
    from statsmodels.tsa.stattools import acf

    model_id = config['model']['model_id']
    net = build_model(model_id, seed=config['seed'],
                      **model_kwargs(config, per_model=False))
    dense = [bundle for _, _, bundle in net.dense_layers()]
    layer = config['sample']['layer']
    if not 0 <= layer < len(dense):
        raise ConfigurationError('sample.layer must be in 0..{}'.format(
            len(dense) - 1))
    W = dense[layer].W.T

    record = ExperimentRecord('sample', config, {'root': config['seed']})
    record.add_table('weights', ['neuron'] + ['w{}'.format(j) for j in
                                               range(W.shape[1])],
                     ([i] + row.tolist() for i, row in enumerate(W)))
    lag1 = np.array([acf(row, nlags=1, fft=False)[1]
                     if np.ptp(row) > 0 else 0. for row in W])
    support = np.array([_support_width(row) for row in W])
    record.add_table('diagnostics', ['neuron', 'lag1_acf', 'support_width'],
                     zip(range(W.shape[0]), lag1, support))
    record.extra.update({'mean_lag1_acf': float(lag1.mean()),
                         'mean_support_width': float(support.mean()),
                         'params_hash': net.params_hash()})
    os.makedirs(out, exist_ok=True)
    save_checkpoint(net, os.path.join(out, 'model'))
    logging.info('model {}: mean lag-1 autocorrelation {:.3f}, mean support '
                 'width {:.1f}'.format(model_id, lag1.mean(),
                                       support.mean()))
    return record


def _ntk_check_cell(cell):
    config, width, out = cell
    train_cfg = config['train']
    model_id = config['model']['model_id']
    seed = config['seed']
    train, val = _split(config, config['data']['n_train'],
                        config['data']['n_val'], seed)
    Y_train, Y_val = train.targets(), val.targets()
    kwargs = model_kwargs(config, per_model=False, widths=width)
    if train_cfg['best_cell']:
        with open(train_cfg['best_cell']) as fh:
            best = json.load(fh)
        kwargs.update(sigma_r=best['sigma_r'], sigma_s=best['sigma_s'])
        logging.info('using sigma_r={sigma_r} sigma_s={sigma_s} from the '
                     'grid search'.format(**best))
    net = build_model(model_id, seed=seed, **kwargs)
    net0 = net.copy()
    positions, classes = train.probe_positions()
    X_probe = train.images[positions]

    theta0 = empirical_ntk(net0, train.images, mode='full')
    if train_cfg['eta_mode'] == 'auto':
        eta = auto_learning_rate(net0, train.images, theta0)
    else:
        eta = train_cfg['eta']
    cfg = TrainConfig(train_cfg['steps'], 'fixed', eta,
                      train_cfg['log_points'], seed,
                      train_cfg['batch_size'],
                      train_cfg['divergence_threshold'])
    history = sgd_train(net, train.images, Y_train, val.images, Y_val, cfg,
                        X_probe, list(classes - 1))

    state = LinearizedState(theta0, forward(net0, train.images).outputs,
                            Y_train, eta, train_cfg['discrete'])
    theta_probe = empirical_ntk(net0, X_probe, train.images, mode='full')
    report = compare_dynamics(history, state, theta_probe,
                              forward(net0, X_probe).outputs)

    sub = ExperimentRecord('ntk-check', config, {'root': seed})
    sub.add_table('history', history.columns, history.rows())
    sub.add_table('dynamics', report.columns, report.rows())
    sub.extra.update({'width': width, 'eta': eta,
                      'train_indices': train.indices,
                      'val_indices': val.indices,
                      'params_hash': history.params_hash})
    sub.timings['training'] = history.elapsed
    write_record(sub, os.path.join(out, 'width_{}'.format(width)))
    last = history.records[-1]
    return [width, eta, last['train_loss'], last['train_acc'],
            last['val_loss'], last['val_acc'], report.max_deviation]


def cmd_ntk_check(config, out):
    """
    train one model per width by gradient descent and compare the outputs
    with the linearized dynamics
    """
    widths = config['train']['widths']
    rows = run_cells(_ntk_check_cell,
                     [(config, width, out) for width in widths],
                     config['jobs'])
    record = ExperimentRecord('ntk-check', config, {'root': config['seed']})
    record.add_table('widths', ['width', 'eta', 'train_loss', 'train_acc',
                                'val_loss', 'val_acc', 'max_deviation'],
                     rows)
    deviations = [row[-1] for row in sorted(rows)]
    record.extra['deviation_decreasing'] = bool(
        np.all(np.diff(deviations) < 0))
    if not record.extra['deviation_decreasing']:
        logging.warning('output deviation does not decrease with width: '
                        '{}'.format(deviations))
    return record


def _regress_cell(cell):
    """
    one (model, trial) regression; reports the full kernel and, derived
    from it, the class trace kernel
    """
    config, model_id, trial = cell
    section = config['regress']
    seed = _trial_seed(config, trial)
    train, test = _split(config, section['n_train'], section['n_test'], seed)
    Y_train, Y_test = train.targets(), test.targets()
    net = build_model(model_id, seed=seed, **model_kwargs(config, model_id))
    theta_train, theta_test = train_test_kernels(
        net, train.images, test.images, mode=config['kernel']['mode'])
    kernels = [(theta_train, theta_test)]
    if theta_train.mode == 'full':
        kernels.append((theta_train.to_trace(), theta_test.to_trace()))
    rows = []
    for train_kernel, test_kernel in kernels:
        f, ridge = ntk_regression(test_kernel, train_kernel, Y_train,
                                  full_output=True)
        rows.append([model_id, trial, train_kernel.mode,
                     mse_loss(f, Y_test, per='entry'), accuracy(f, Y_test),
                     ridge])
    logging.info('model {} trial {}: test loss {:g}'.format(
        model_id, trial, rows[0][3]))
    return rows


def _summary(rows, keys, values):
    """
    mean and standard deviation of value columns grouped by key columns
    """
    groups = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row)
    ret = []
    for key in sorted(groups):
        data = np.array([[row[v] for v in values] for row in groups[key]],
                        dtype=np.float64)
        stats = []
        for column in data.T:
            stats += [column.mean(), column.std()]
        ret.append(list(key) + stats + [len(groups[key])])
    return ret


def cmd_regress(config, out):
    """
    test loss and accuracy of tangent kernel regression per model
    """
    section = config['regress']
    cells = [(config, model_id, trial) for model_id in section['models']
             for trial in range(section['trials'])]
    rows = [row for result in run_cells(_regress_cell, cells,
                                        config['jobs'])
            for row in result]
    record = ExperimentRecord('regress', config, {
        'root': config['seed'],
        'trials': [_trial_seed(config, t) for t in range(section['trials'])]})
    record.add_table('trials', ['model', 'trial', 'mode', 'loss', 'accuracy',
                                'ridge'], rows)
    summary = _summary(rows, (0, 2), (3, 4))
    record.add_table('summary', ['model', 'mode', 'loss_mean', 'loss_std',
                                 'acc_mean', 'acc_std', 'trials'], summary)
    record.ridge = {'{}/{}/{}'.format(row[0], row[1], row[2]): row[5]
                    for row in rows}
    return record


def _references(config, count, seed):
    references, _ = _split(config, count, 0, derive_seed(seed, 'references'))
    return references.images


def _perturbation(config, kind=None):
    section = dict(config['perturbation'])
    if kind is not None:
        section['kind'] = kind
    return PerturbationSpec.from_dict(section)


def _grid_cell(cell):
    config, model_id, sigma_r, sigma_s = cell
    section = config['grid']
    kwargs = model_kwargs(config, model_id, sigma_r=sigma_r,
                          sigma_s=sigma_s)
    result = {'sigma_r': sigma_r, 'sigma_s': sigma_s}
    if 'loss' in section['metrics']:
        losses = []
        for trial in range(section['trials']):
            seed = _trial_seed(config, trial)
            train, test = _split(config, section['n_train'],
                                 section['n_test'], seed)
            net = build_model(model_id, seed=seed, **kwargs)
            theta_train, theta_test = train_test_kernels(
                net, train.images, test.images,
                mode=config['kernel']['mode'])
            f = ntk_regression(theta_test, theta_train, train.targets())
            losses.append(mse_loss(f, test.targets(), per='entry'))
        result['loss'] = (np.mean(losses), np.std(losses))
    if 'distance' in section['metrics']:
        report = deformation_stability(
            {model_id: ModelBuilder(model_id, kwargs)},
            _references(config, section['n_references'], config['seed']),
            _perturbation(config), section['trials'], config['seed'])
        record = report.records[0]
        result['distance'] = (record['mean'], record['std'])
    logging.info('grid cell sigma_r={} sigma_s={}: {}'.format(
        sigma_r, sigma_s, result))
    return result


def cmd_grid(config, out):
    """
    sigma_r x sigma_s sweep of the regression loss and the relative
    distance; the minimizing cell of every metric is written to
    best_cell.json (the loss cell is read by ntk-check via
    train.best_cell)
    """
    section = config['grid']
    model_id = config['model']['model_id']
    cells = [(config, model_id, sigma_r, sigma_s)
             for sigma_r in section['sigma_r']
             for sigma_s in section['sigma_s']]
    results = run_cells(_grid_cell, cells, config['jobs'])
    record = ExperimentRecord('grid', config, {'root': config['seed']})
    header = ['sigma_r'] + ['sigma_s={:g}'.format(s)
                            for s in section['sigma_s']]
    n_s = len(section['sigma_s'])
    best = {'model_id': model_id}
    for metric in section['metrics']:
        for index, name in ((0, metric), (1, metric + '_std')):
            record.add_table(name, header, (
                [sigma_r] + [result[metric][index] for result in
                             results[i * n_s:(i + 1) * n_s]]
                for i, sigma_r in enumerate(section['sigma_r'])))
        cell = min(results, key=lambda result: result[metric][0])
        best[metric] = {'sigma_r': cell['sigma_r'],
                        'sigma_s': cell['sigma_s'],
                        'value': cell[metric][0]}
    record.extra['best'] = best
    os.makedirs(out, exist_ok=True)
    if 'loss' in best:
        with open(os.path.join(out, BEST_CELL), 'w') as fh:
            json.dump(dict(best['loss'], model_id=model_id), fh, indent=2)
    return record


def _stability_cell(cell):
    config, kind, model_id = cell
    section = config['stability']
    builder = ModelBuilder(model_id, model_kwargs(config, model_id))
    return deformation_stability(
        {model_id: builder},
        _references(config, section['n_references'], config['seed']),
        _perturbation(config, kind), section['trials'], config['seed'])


def cmd_stability(config, out):
    """
    mean relative kernel distance of perturbed references per model and
    perturbation kind
    """
    section = config['stability']
    cells = [(config, kind, model_id) for kind in section['kinds']
             for model_id in section['models']]
    reports = run_cells(_stability_cell, cells, config['jobs'])
    record = ExperimentRecord('stability', config, {'root': config['seed']})
    columns = reports[0].columns
    record.add_table('stability', columns, (
        row for report in reports for row in report.rows()))
    record.extra['clamped_radicands'] = sum(r.clamped for r in reports)
    record.extra['most_stable'] = {}
    for kind in section['kinds']:
        candidates = [report.records[0] for report in reports
                      if report.records[0]['kind'] == kind]
        record.extra['most_stable'][kind] = min(
            candidates, key=lambda r: r['mean'])['model']
    return record


def _noise_cell(cell):
    config, model_id = cell
    section = config['noise']
    train, test = _split(config, section['n_train'], section['n_test'],
                         config['seed'])
    builder = ModelBuilder(model_id, model_kwargs(config, model_id))
    return noise_robustness_curve(
        {model_id: builder}, section['levels'], train.images,
        train.targets(), test.images, test.targets(), section['trials'],
        config['seed'], mode=config['kernel']['mode'])


def cmd_noise(config, out):
    """
    regression loss on test inputs with increasing Gaussian noise
    """
    section = config['noise']
    reports = run_cells(_noise_cell, [(config, model_id) for model_id in
                                      section['models']], config['jobs'])
    record = ExperimentRecord('noise', config, {'root': config['seed']})
    record.add_table('noise', reports[0].columns, (
        row for report in reports for row in report.rows()))
    monotone = {}
    for report in reports:
        means = [r['mean'] for r in report.records]
        monotone[str(report.records[0]['model'])] = bool(
            np.all(np.diff(means) >= 0))
    record.extra['non_decreasing'] = monotone
    return record


def _md5(path):
    digest = hashlib.md5()
    with open(path, 'rb') as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def cmd_fetch(config, out):
    """
    download the MNIST files into the data directory and verify their MD5
    """
    from urllib.request import urlopen

    directory = config['data']['dir'] or data_path()
    os.makedirs(directory, exist_ok=True)
    record = ExperimentRecord('fetch', config)
    rows = []
    for name, md5 in sorted(MNIST_MD5.items()):
        path = os.path.join(directory, name)
        if os.path.exists(path) and _md5(path) == md5:
            logging.info('{} already present'.format(name))
        else:
            logging.info('downloading {}'.format(name))
            with urlopen(MNIST_MIRROR + name) as response, \
                    open(path + '.part', 'wb') as fh:
                shutil.copyfileobj(response, fh)
            if _md5(path + '.part') != md5:
                os.remove(path + '.part')
                raise DataFormatError('checksum mismatch for {}'.format(name))
            os.rename(path + '.part', path)
        rows.append([name, md5, path])
    record.add_table('files', ['name', 'md5', 'path'], rows)
    return record


COMMANDS = {
    'sample': cmd_sample,
    'ntk-check': cmd_ntk_check,
    'regress': cmd_regress,
    'grid': cmd_grid,
    'stability': cmd_stability,
    'noise': cmd_noise,
    'fetch': cmd_fetch,
}


def getargs(test=None):
    from argparse import ArgumentParser

    common = ArgumentParser(add_help=False)
    common.add_argument('--config', type=str,
                        help='JSON configuration file')
    common.add_argument('--seed', type=int, help='root seed')
    common.add_argument('--out', type=str, default='.',
                        help='output directory')
    common.add_argument('--jobs', type=int, help='number of worker processes')
    common.add_argument('--model', type=int, choices=(1, 2, 3, 4, 5),
                        help='model id')
    common.add_argument('--width', type=int, help='hidden layer width')
    common.add_argument('--trials', type=int, help='number of trials')
    common.add_argument('--replay', type=str, metavar='MANIFEST',
                        help='re-run with the configuration of a manifest')
    common.add_argument('--set', dest='overrides', action='append',
                        default=[], metavar='KEY=VALUE',
                        help='override a configuration key, e.g. '
                        'model.sigma_r=0.1 (VALUE is parsed as JSON)')
    common.add_argument('-v', '--verbose', dest="log_level",
                        const=logging.INFO, action='store_const',
                        default=logging.WARNING, help='be verbose')
    common.add_argument('-d', '--debug', dest="log_level",
                        const=logging.DEBUG, action='store_const',
                        help='print debug messages')

    parser = ArgumentParser(description='random neural field experiments')
    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True
    for name, func in sorted(COMMANDS.items()):
        subparsers.add_parser(name, parents=[common],
                              help=func.__doc__.strip().split('\n')[0])
    return parser.parse_args(test)


def _parse_override(item):
    if '=' not in item:
        raise ConfigurationError("override '{}' is not KEY=VALUE".format(
            item))
    key, value = item.split('=', 1)
    try:
        value = json.loads(value)
    except ValueError:
        pass
    return key, value


def effective_config(args):
    """
    the merged configuration of a command line

    The order is defaults, --config file or --replay manifest, --set
    overrides and finally the dedicated flags.
    """
    overrides = dict(_parse_override(item) for item in args.overrides)
    if args.seed is not None:
        overrides['seed'] = args.seed
    if args.jobs is not None:
        overrides['jobs'] = args.jobs
    if args.model is not None:
        overrides['model.model_id'] = args.model
        for section in ('regress', 'stability', 'noise'):
            overrides[section + '.models'] = [args.model]
    if args.width is not None:
        overrides['model.width'] = args.width
        overrides['model.widths'] = None
        overrides['train.widths'] = [args.width]
    if args.trials is not None:
        for section in ('regress', 'grid', 'stability', 'noise'):
            overrides[section + '.trials'] = args.trials

    if args.replay:
        manifest = read_manifest(args.replay)
        if manifest['command'] != args.command:
            raise ConfigurationError(
                "manifest {} was written by '{}', not '{}'".format(
                    args.replay, manifest['command'], args.command))
        config = validate(manifest['config'])
        if overrides:
            from pyrnf.config import set_path
            for key, value in sorted(overrides.items()):
                set_path(config, key, value)
            config = validate(config)
        return config
    return load_config(args.config, overrides)


def run(args):
    """
    execute a parsed command line

    Returns:

        the exit code: 0 on success, 2 for configuration errors, 3 for
        numerical failures and 4 for I/O errors
    """
    try:
        config = effective_config(args)
        start = time.time()
        record = COMMANDS[args.command](config, args.out)
        record.timings['total'] = time.time() - start
        write_record(record, args.out)
    except RNFError as err:
        logging.error('{}: {}'.format(type(err).__name__, err))
        return err.exit_code
    except (IOError, OSError) as err:
        logging.error('I/O error: {}'.format(err))
        return 4
    return 0


def main(test=None):
    import sys

    args = getargs(test)
    logging.basicConfig(
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s: %(message)s",
        level=args.log_level, datefmt='%F %T'
    )
    logging.info('Running {}'.format(' '.join(sys.argv)))
    return run(args)
