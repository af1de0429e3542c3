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
Assembly of empirical tangent kernels and closed form linearized dynamics

The kernel is contracted layer by layer from the forward activations and
the backpropagated class signals; Jacobians are never materialized. For a
dense layer with inputs x, signals delta and scale s = sigma_w / sqrt(n_in)
the contribution to Theta((i, k), (j, l)) is::

    sum_c delta_ikc delta'_jlc (s^2 sum_a R_ac^2 x_ia x'_ja + sigma_b^2)

which for an all-ones mask collapses to
``(s^2 x_i . x'_j + sigma_b^2) (delta_ik . delta'_jl)``.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg

from pyrnf import config
from pyrnf.exceptions import (ConfigurationError, ConvergenceError,
                              DecompositionError, KernelMemoryError,
                              ShapeError)
from pyrnf.fields.sampling import derive_rng
from pyrnf.network.methods import class_signals, forward
from pyrnf.tangent import MODES, TangentKernel

# upper bound for the temporaries of one row block of a masked layer
BLOCK_ENTRIES = 2 ** 25


def _check_memory(n_rows, n_cols, n_classes, mode):
    factor = n_classes ** 2 if mode == 'full' else 1
    entries = n_rows * n_cols * factor
    if entries > config['max_kernel_entries']:
        raise KernelMemoryError(
            'a {} kernel of {}x{} examples needs {} entries, the limit is '
            '{} (pyrnf.config["max_kernel_entries"])'.format(
                mode, n_rows, n_cols, entries,
                config['max_kernel_entries']))


def _dense_block(x_rows, x_cols, d_rows, d_cols, bundle, mode):
    """
    kernel contribution of an unmasked dense layer
    """
    N, C, n = d_rows.shape
    M = d_cols.shape[0]
    gram = bundle.scale ** 2 * x_rows.dot(x_cols.T) + bundle.sigma_b ** 2
    if mode == 'trace':
        return gram * d_rows.reshape(N, C * n).dot(d_cols.reshape(M, C * n).T)
    signal = d_rows.reshape(N * C, n).dot(d_cols.reshape(M * C, n).T)
    signal = signal.reshape(N, C, M, C) * gram[:, np.newaxis, :, np.newaxis]
    return signal.reshape(N * C, M * C)


def _masked_rows(x_rows, x_cols, d_rows, d_cols, bundle, mode):
    """
    kernel contribution of a masked dense layer for a block of rows
    """
    b, C, n = d_rows.shape
    M = d_cols.shape[0]
    pairs = (x_rows[:, np.newaxis, :] * x_cols[np.newaxis, :, :]).reshape(
        b * M, -1)
    weight = (bundle.scale ** 2 * pairs.dot(bundle.R ** 2)).reshape(b, M, n)
    weight += bundle.sigma_b ** 2
    if mode == 'trace':
        signal = np.einsum('ikc,jkc->ijc', d_rows, d_cols)
        return (weight * signal).sum(axis=-1)
    left = weight[:, np.newaxis, :, :] * d_rows[:, :, np.newaxis, :]
    left = left.transpose(2, 0, 1, 3).reshape(M, b * C, n)
    block = np.matmul(left, d_cols.transpose(0, 2, 1))
    return block.reshape(M, b, C, C).transpose(1, 2, 0, 3).reshape(
        b * C, M * C)


def _masked_dense(x_rows, x_cols, d_rows, d_cols, bundle, mode, jobs):
    N, C, n = d_rows.shape
    M = d_cols.shape[0]
    rows = max(1, BLOCK_ENTRIES // (M * max(C * n, x_rows.shape[1])))
    starts = list(range(0, N, rows))

    def compute(start):
        stop = min(start + rows, N)
        return _masked_rows(x_rows[start:stop], x_cols, d_rows[start:stop],
                            d_cols, bundle, mode)

    if jobs > 1 and len(starts) > 1:
        # numpy releases the GIL in the contractions
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            blocks = list(executor.map(compute, starts))
    else:
        blocks = [compute(start) for start in starts]
    return np.vstack(blocks)


def empirical_ntk(net, X_rows, X_cols=None, mode='full', jobs=1):
    """
    empirical tangent kernel of a network at its current parameters

    The trainable parameters are W_tilde and beta of every dense layer.

    Args:

    * net (:class:`pyrnf.network.NetworkModel`):
        the network

    * X_rows (numpy.array):
        (N, input_width) inputs of the kernel rows

    Kwargs:

    * X_cols (numpy.array):
        (M, input_width) inputs of the kernel columns (default: X_rows;
        the result is then exactly symmetric)

    * mode (str):
        full (vector output kernel) or trace (sum over class blocks)

    * jobs (int):
        number of threads used for masked layers

    Returns:

        :class:`pyrnf.tangent.TangentKernel`
    """
    if mode not in MODES:
        raise ConfigurationError("kernel mode '{}' not supported".format(mode))
    symmetric = X_cols is None or X_cols is X_rows
    trace_rows = forward(net, X_rows)
    trace_cols = trace_rows if symmetric else forward(net, X_cols)
    N, M, C = trace_rows.n_examples, trace_cols.n_examples, net.n_classes
    _check_memory(N, M, C, mode)

    start = time.time()
    signals_rows = class_signals(net, trace_rows)
    signals_cols = signals_rows if symmetric else class_signals(
        net, trace_cols)
    entries = None
    for index, spec, bundle in net.dense_layers():
        args = (trace_rows.inputs[index], trace_cols.inputs[index],
                signals_rows[index], signals_cols[index], bundle, mode)
        if bundle.unmasked:
            contribution = _dense_block(*args)
        else:
            contribution = _masked_dense(*args, jobs=jobs)
        entries = contribution if entries is None else \
            entries + contribution
    if symmetric:
        entries = (entries + entries.T) / 2.
    logging.info('assembled {} tangent kernel of {}x{} examples in '
                 '{:.2f}s'.format(mode, N, M, time.time() - start))
    return TangentKernel(entries, N, M, C, mode)


def kernel_evaluator(net, mode='trace', jobs=1):
    """
    a function (X_rows, X_cols) -> TangentKernel bound to one network
    """
    def evaluate(X_rows, X_cols=None):
        return empirical_ntk(net, X_rows, X_cols, mode=mode, jobs=jobs)
    return evaluate


def max_eigenvalue(theta, tol=1e-6, max_iter=10000, seed=0):
    """
    largest eigenvalue of a symmetric positive semi-definite kernel by
    power iteration

    Args:

    * theta (:class:`pyrnf.tangent.TangentKernel` or numpy.array):
        the square kernel

    Kwargs:

    * tol (float):
        relative change of the Rayleigh quotient to stop at

    * max_iter (int):
        iteration limit

    * seed (int):
        seed of the random start vector

    Returns:

        float
    """
    K = theta.entries if isinstance(theta, TangentKernel) else \
        np.asarray(theta, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ShapeError('power iteration needs a square matrix')
    v = derive_rng(seed, 'power_iteration').standard_normal(K.shape[0])
    v /= np.linalg.norm(v)
    value = None
    for iteration in range(max_iter):
        w = K.dot(v)
        new = float(v.dot(w))
        norm = np.linalg.norm(w)
        if norm == 0.:
            return 0.
        v = w / norm
        if value is not None and abs(new - value) <= tol * abs(new):
            logging.debug('power iteration converged after {} steps'.format(
                iteration + 1))
            return new
        value = new
    raise ConvergenceError(
        'power iteration did not converge within {} iterations'.format(
            max_iter))


def solve_kernel(K, rhs, ridge_start=None, ridge_max=None):
    """
    solve (K + eps mean(diag K) I) u = rhs by Cholesky decomposition

    eps starts at ridge_start and is increased tenfold until the
    decomposition succeeds or ridge_max is exceeded.

    Args:

    * K (numpy.array):
        square symmetric matrix

    * rhs (numpy.array):
        right hand side(s)

    Kwargs:

    * ridge_start, ridge_max (float):
        relative ridge range (default: pyrnf.config)

    Returns:

        (solution, eps)
    """
    if ridge_start is None:
        ridge_start = config['ridge_start']
    if ridge_max is None:
        ridge_max = config['ridge_max']
    K = np.asarray(K, dtype=np.float64)
    scale = np.mean(np.diag(K))
    if not scale > 0:
        raise DecompositionError('kernel diagonal is not positive')
    eps = ridge_start
    while eps <= ridge_max * (1. + 1e-9):
        try:
            factor = scipy.linalg.cho_factor(
                K + eps * scale * np.eye(K.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            logging.warning('kernel decomposition failed with ridge {:g}, '
                            'increasing'.format(eps))
            eps *= 10.
            continue
        logging.debug('kernel decomposed with ridge {:g}'.format(eps))
        return scipy.linalg.cho_solve(factor, rhs), eps
    raise DecompositionError(
        'kernel not positive definite up to ridge {:g}'.format(ridge_max))


def _time_weights(eigenvalues, t, eta, n_train, discrete):
    """
    spectral weights of Theta^-1 (I - exp(-eta t Theta / N)), or of
    Theta^-1 (I - (I - eta Theta / N)^t) for discrete steps
    """
    lam = eigenvalues
    rate = eta / n_train
    tiny = np.abs(lam) < 1e-300
    safe = np.where(tiny, 1., lam)
    with np.errstate(over='ignore', invalid='ignore'):
        if discrete:
            q = 1. - rate * safe
            positive = q > 0.
            decay = np.where(positive,
                             -np.expm1(t * np.log1p(-rate * safe)),
                             1. - np.power(q, t))
            weights = decay / safe
        else:
            weights = -np.expm1(-rate * t * safe) / safe
    return np.where(tiny, rate * t, weights)


def _check_pair(theta_test_train, theta_train, f0_test=None):
    if theta_test_train.mode != theta_train.mode:
        raise ShapeError('kernels must share one mode')
    if theta_test_train.n_cols != theta_train.n_rows or \
            theta_test_train.n_classes != theta_train.n_classes:
        raise ShapeError('test kernel {} does not match training kernel '
                         '{}'.format(theta_test_train, theta_train))
    if f0_test is not None and np.shape(f0_test) != (
            theta_test_train.n_rows, theta_test_train.n_classes):
        raise ShapeError('initial test outputs of shape {} do not match '
                         '{}'.format(np.shape(f0_test), theta_test_train))


def _apply(theta_test_train, u):
    out = theta_test_train.entries.dot(u)
    return out.reshape(theta_test_train.n_rows, theta_test_train.n_classes)


def linearized_output(state, theta_test_train, f0_test, t):
    """
    outputs of the linearized network after training time t

    f_t(x') = f0(x') - Theta(x', X) Theta^-1 (I - exp(-eta t Theta / N))
    (f0(X) - Y), evaluated with the eigendecomposition of Theta. For
    discrete states t counts gradient steps.

    Args:

    * state (:class:`pyrnf.tangent.LinearizedState`):
        the linearized model

    * theta_test_train (:class:`pyrnf.tangent.TangentKernel`):
        Theta(X', X)

    * f0_test (numpy.array):
        (M, C) outputs at initialization

    * t (float):
        time; numpy.inf gives the fully trained limit

    Returns:

        (M, C) numpy.array
    """
    _check_pair(theta_test_train, state.theta0, f0_test)
    if t < 0:
        raise ConfigurationError('time must be non-negative')
    f0_test = np.asarray(f0_test, dtype=np.float64)
    if t == 0:
        return f0_test.copy()
    r = state.residual
    if np.isinf(t):
        u, _ = solve_kernel(state.theta0.entries, r)
    else:
        lam, V = state.eigh
        weights = _time_weights(lam, t, state.eta, state.n_train,
                                state.discrete)
        weights = weights.reshape((-1, ) + (1, ) * (r.ndim - 1))
        u = V.dot(weights * V.T.dot(r))
    return f0_test - _apply(theta_test_train, u)


def ntk_regression(theta_test_train, theta_train, Y, full_output=False):
    """
    kernel regression with the tangent kernel

    f* = Theta(x', X) Theta(X, X)^-1 Y, per (example, class) for full
    kernels and per class column for trace kernels.

    Args:

    * theta_test_train (:class:`pyrnf.tangent.TangentKernel`):
        Theta(X', X)

    * theta_train (:class:`pyrnf.tangent.TangentKernel`):
        Theta(X, X)

    * Y (numpy.array):
        (N, C) encoded targets

    Kwargs:

    * full_output (bool):
        also return the relative ridge used

    Returns:

        (M, C) numpy.array, or (predictions, ridge) with full_output
    """
    _check_pair(theta_test_train, theta_train)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != (theta_train.n_rows, theta_train.n_classes):
        raise ShapeError('targets of shape {} do not match {}'.format(
            Y.shape, theta_train))
    rhs = Y.ravel() if theta_train.mode == 'full' else Y
    u, eps = solve_kernel(theta_train.entries, rhs)
    predictions = _apply(theta_test_train, u)
    if full_output:
        return predictions, eps
    return predictions


def train_test_kernels(net, X_train, X_test, mode='full', jobs=1):
    """
    Theta(X, X) and Theta(X', X) of one network
    """
    theta_train = empirical_ntk(net, X_train, mode=mode, jobs=jobs)
    theta_test = empirical_ntk(net, X_test, X_train, mode=mode, jobs=jobs)
    return theta_train, theta_test
