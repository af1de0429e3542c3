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
Full batch gradient descent on the loss (1 / 2N) ||f - Y||^2 and the
comparison of the resulting trajectories with the linearized dynamics
"""

import logging
import time

import numpy as np

from pyrnf.exceptions import ConfigurationError, DivergenceError, ShapeError
from pyrnf.fields.sampling import derive_rng
from pyrnf.network.methods import backward, forward
from pyrnf.training.utils import accuracy, log_schedule, mse_loss

ETA_MODES = ('auto', 'fixed')


class TrainConfig(object):

    """
    Settings of a training run

    The learning rate is 2 / lambda_max of the initial tangent kernel in
    the auto mode and ``eta`` in the fixed mode.
    """

    def __init__(self, steps=1000000, eta_mode='auto', eta=None,
                 log_points=60, seed=0, batch_size=None,
                 divergence_threshold=1e6):
        if int(steps) < 1:
            raise ConfigurationError('steps must be at least 1')
        if eta_mode not in ETA_MODES:
            raise ConfigurationError("eta_mode '{}' not supported".format(
                eta_mode))
        if eta_mode == 'fixed' and (eta is None or eta < 0):
            raise ConfigurationError('a fixed learning rate must be given '
                                     'and non-negative')
        if batch_size is not None and int(batch_size) < 1:
            raise ConfigurationError('batch_size must be positive')
        self.steps = int(steps)
        self.eta_mode = eta_mode
        self.eta = eta
        self.log_points = int(log_points)
        self.seed = seed
        self.batch_size = None if batch_size is None else int(batch_size)
        self.divergence_threshold = float(divergence_threshold)

    @property
    def schedule(self):
        return log_schedule(self.steps, self.log_points)

    def to_dict(self):
        return {'steps': self.steps, 'eta_mode': self.eta_mode,
                'eta': self.eta, 'log_points': self.log_points,
                'seed': self.seed, 'batch_size': self.batch_size,
                'divergence_threshold': self.divergence_threshold}


class TrainingHistory(object):

    """
    Losses, accuracies and probe outputs at the logged steps
    """
    base_columns = ('step', 'train_loss', 'val_loss', 'train_acc',
                    'val_acc')

    def __init__(self, eta, n_train, probe_classes=()):
        self.eta = eta
        self.n_train = n_train
        self.probe_classes = list(probe_classes)
        self.records = []
        self.probe_outputs = []
        self.params_hash = None
        self.elapsed = None

    def __len__(self):
        return len(self.records)

    @property
    def columns(self):
        return self.base_columns + tuple(
            'probe_{}'.format(i) for i in range(len(self.probe_classes)))

    @property
    def steps(self):
        return [record['step'] for record in self.records]

    def column(self, name):
        return np.array([record[name] for record in self.records],
                        dtype=np.float64)

    def append(self, step, train_loss, train_acc, val_loss=np.nan,
               val_acc=np.nan, probe=None):
        record = {'step': int(step), 'train_loss': train_loss,
                  'val_loss': val_loss, 'train_acc': train_acc,
                  'val_acc': val_acc}
        if probe is not None:
            self.probe_outputs.append(probe)
            for i, cls in enumerate(self.probe_classes):
                record['probe_{}'.format(i)] = float(probe[i, cls])
        self.records.append(record)

    def rows(self):
        """
        iterate over the CSV rows in column order
        """
        for record in self.records:
            yield [record.get(name, np.nan) for name in self.columns]


class DynamicsReport(object):

    """
    Deviation between a gradient descent run and the linearized model
    """
    columns = ('step', 'max_abs_deviation', 'mean_abs_deviation',
               'train_loss_sgd', 'train_loss_linear', 'loss_deviation')

    def __init__(self):
        self.records = []

    def append(self, step, deviation, loss_sgd, loss_linear):
        self.records.append({
            'step': int(step),
            'max_abs_deviation': float(np.max(deviation)),
            'mean_abs_deviation': float(np.mean(deviation)),
            'train_loss_sgd': float(loss_sgd),
            'train_loss_linear': float(loss_linear),
            'loss_deviation': float(abs(loss_sgd - loss_linear))})

    @property
    def max_deviation(self):
        """
        largest absolute output deviation over the whole horizon
        """
        return max(record['max_abs_deviation'] for record in self.records)

    def rows(self):
        for record in self.records:
            yield [record[name] for name in self.columns]


def auto_learning_rate(net, X_train, theta0=None):
    """
    2 / lambda_max of the initial full tangent kernel on the training set
    """
    from pyrnf.tangent.methods import empirical_ntk, max_eigenvalue
    if theta0 is None:
        theta0 = empirical_ntk(net, X_train, mode='full')
    lam = max_eigenvalue(theta0)
    logging.info('largest kernel eigenvalue {:g}, learning rate '
                 '{:g}'.format(lam, 2. / lam))
    return 2. / lam


def sgd_train(net, X_train, Y_train, X_val=None, Y_val=None, cfg=None,
              X_probe=None, probe_classes=None, theta0=None):
    """
    train a network by gradient descent, updating it in place

    Args:

    * net (:class:`pyrnf.network.NetworkModel`):
        the network; its parameters are changed

    * X_train, Y_train (numpy.array):
        training inputs and encoded targets

    Kwargs:

    * X_val, Y_val (numpy.array):
        validation set

    * cfg (:class:`TrainConfig`):
        run settings (default: ``TrainConfig()``)

    * X_probe (numpy.array):
        inputs whose outputs are traced at every logged step

    * probe_classes (list of int):
        output coordinate traced for each probe input

    * theta0 (:class:`pyrnf.tangent.TangentKernel`):
        precomputed full training kernel for the auto learning rate

    Returns:

        :class:`TrainingHistory`
    """
    cfg = cfg or TrainConfig()
    X_train = np.asarray(X_train, dtype=np.float64)
    Y_train = np.asarray(Y_train, dtype=np.float64)
    if X_train.shape[0] != Y_train.shape[0]:
        raise ShapeError('{} inputs but {} targets'.format(
            X_train.shape[0], Y_train.shape[0]))
    if cfg.eta_mode == 'auto':
        eta = auto_learning_rate(net, X_train, theta0)
    else:
        eta = float(cfg.eta)
    if X_probe is not None and probe_classes is None:
        raise ConfigurationError('probe inputs need probe classes')
    N = X_train.shape[0]
    history = TrainingHistory(eta, N, probe_classes or ())
    schedule = set(cfg.schedule)
    rng = derive_rng(cfg.seed, 'batches')
    start = time.time()

    for step in range(cfg.steps + 1):
        trace = forward(net, X_train)
        f = trace.outputs
        loss = mse_loss(f, Y_train)
        if not np.isfinite(loss) or loss > cfg.divergence_threshold:
            raise DivergenceError(
                'training loss {:g} at step {} exceeds {:g} (learning rate '
                '{:g})'.format(loss, step, cfg.divergence_threshold, eta))
        if step in schedule:
            kwargs = {}
            if X_val is not None:
                f_val = forward(net, X_val).outputs
                kwargs['val_loss'] = mse_loss(f_val, Y_val)
                kwargs['val_acc'] = accuracy(f_val, Y_val)
            if X_probe is not None:
                kwargs['probe'] = forward(net, X_probe).outputs
            history.append(step, loss, accuracy(f, Y_train), **kwargs)
            logging.debug('step {}: train loss {:g}'.format(step, loss))
        if step == cfg.steps:
            break
        if cfg.batch_size is not None and cfg.batch_size < N:
            batch = rng.choice(N, cfg.batch_size, replace=False)
            trace = forward(net, X_train[batch])
            cotangent = (trace.outputs - Y_train[batch]) / cfg.batch_size
        else:
            cotangent = (f - Y_train) / N
        grads, _ = backward(net, trace, cotangent)
        net.apply_update(grads, eta)

    history.params_hash = net.params_hash()
    history.elapsed = time.time() - start
    logging.info('trained {} steps in {:.1f}s, final train loss {:g}'.format(
        cfg.steps, history.elapsed, history.records[-1]['train_loss']))
    return history


def compare_dynamics(history, state, theta_probe_train, f0_probe):
    """
    compare a gradient descent history with the linearized model

    The training step count is used as the time of the linearized model.

    Args:

    * history (:class:`TrainingHistory`):
        run with probe outputs recorded

    * state (:class:`pyrnf.tangent.LinearizedState`):
        the linearized model with the same learning rate and data

    * theta_probe_train (:class:`pyrnf.tangent.TangentKernel`):
        Theta(X_probe, X_train) at initialization

    * f0_probe (numpy.array):
        probe outputs at initialization

    Returns:

        :class:`DynamicsReport`
    """
    from pyrnf.tangent.methods import linearized_output
    if not history.probe_outputs:
        raise ConfigurationError('the history holds no probe outputs')
    if history.n_train != state.n_train or \
            not np.isclose(history.eta, state.eta, rtol=1e-12, atol=0.):
        raise ConfigurationError(
            'history (eta={:g}, N={}) and linearized model (eta={:g}, N={}) '
            'do not match'.format(history.eta, history.n_train, state.eta,
                                  state.n_train))
    report = DynamicsReport()
    for record, probe in zip(history.records, history.probe_outputs):
        step = record['step']
        predicted = linearized_output(state, theta_probe_train, f0_probe,
                                      step)
        f_train = linearized_output(state, state.theta0, state.f0_train,
                                    step)
        report.append(step, np.abs(probe - predicted), record['train_loss'],
                      mse_loss(f_train, state.Y))
    return report
