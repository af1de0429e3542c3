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

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from pyrnf import config
from pyrnf.exceptions import (ConvergenceError, KernelMemoryError,
                              ShapeError)
from pyrnf.fields.sampling import derive_rng
from pyrnf.network import build_model
from pyrnf.network.methods import backward, flat_gradient, forward
from pyrnf.tangent import LinearizedState, TangentKernel
from pyrnf.tangent.methods import (empirical_ntk, linearized_output,
                                   max_eigenvalue, ntk_regression,
                                   solve_kernel, train_test_kernels)


def _tiny(model_id, seed=0):
    return build_model(model_id, widths=(16, 12, 10), sigma_r=0.5,
                       sigma_s=0.2, seed=seed, input_width=12, n_classes=3)


def _inputs(n, seed=0):
    return derive_rng(seed, 'inputs').uniform(0., 1., (n, 12))


def _jacobian(net, X):
    """
    rows are the parameter gradients of every (example, class) output
    """
    rows = []
    C = net.n_classes
    for x in X:
        trace = forward(net, x)
        for k in range(C):
            cotangent = np.zeros((1, C))
            cotangent[0, k] = 1.
            rows.append(flat_gradient(backward(net, trace, cotangent)[0]))
    return np.array(rows)


def test_jacobian_oracle():
    for model_id in range(1, 6):
        net = _tiny(model_id, seed=model_id)
        X = _inputs(4, seed=model_id)
        J = _jacobian(net, X)
        expected = J.dot(J.T)
        theta = empirical_ntk(net, X)
        assert theta.shape == (12, 12)
        assert_allclose(theta.entries, expected, rtol=1e-10,
                        atol=1e-10 * np.abs(expected).max())

        blocks = expected.reshape(4, 3, 4, 3)
        trace = empirical_ntk(net, X, mode='trace')
        assert_allclose(trace.entries, np.einsum('ikjk->ij', blocks),
                        rtol=1e-10, atol=1e-10 * np.abs(expected).max())


def test_cross_kernel_oracle():
    net = _tiny(3, seed=7)
    X_rows, X_cols = _inputs(3, seed=1), _inputs(5, seed=2)
    expected = _jacobian(net, X_rows).dot(_jacobian(net, X_cols).T)
    theta = empirical_ntk(net, X_rows, X_cols)
    assert not theta.is_square
    assert_allclose(theta.entries, expected, rtol=1e-10,
                    atol=1e-10 * np.abs(expected).max())


def test_threaded_masked_layers():
    net = _tiny(1)
    X = _inputs(6)
    serial = empirical_ntk(net, X, jobs=1)
    threaded = empirical_ntk(net, X, jobs=3)
    assert_allclose(threaded.entries, serial.entries, rtol=1e-12)


def test_kernel_properties():
    for model_id in range(1, 6):
        net = _tiny(model_id)
        X = _inputs(6)
        for mode in ('full', 'trace'):
            theta = empirical_ntk(net, X, mode=mode)
            assert_array_equal(theta.entries, theta.entries.T)
            assert np.all(np.diag(theta.entries) >= 0.)
            assert theta.is_psd()


def test_duplicate_rows():
    X = _inputs(4)
    X[3] = X[1]
    theta = empirical_ntk(_tiny(4), X, mode='trace')
    assert_allclose(theta.entries[3], theta.entries[1], rtol=1e-12)
    assert theta.is_psd()


def test_class_trace():
    net = _tiny(5)
    X = _inputs(3)
    full = empirical_ntk(net, X)
    assert_allclose(full.to_trace().entries,
                    empirical_ntk(net, X, mode='trace').entries, rtol=1e-12)
    assert_allclose(full.block(0, 2), full.entries[0:3, 6:9])
    assert full.meta()['layout'] == 'example-major'


def test_kernel_shapes():
    try:
        TangentKernel(np.eye(5), 2, 2, 2)
    except ShapeError:
        pass
    else:
        assert False


def test_memory_guard():
    limit = config['max_kernel_entries']
    config['max_kernel_entries'] = 100
    try:
        empirical_ntk(_tiny(5), _inputs(4))
    except KernelMemoryError:
        pass
    else:
        assert False
    finally:
        config['max_kernel_entries'] = limit


def test_power_iteration():
    assert_allclose(max_eigenvalue(np.eye(4)), 1., rtol=1e-12)
    assert_allclose(max_eigenvalue(np.diag([1., 2., 5.])), 5., rtol=1e-4)
    assert max_eigenvalue(np.zeros((3, 3))) == 0.

    rng = derive_rng(0, 'spectrum')
    Q, _ = np.linalg.qr(rng.standard_normal((20, 20)))
    spectrum = np.concatenate(([10., 6.], rng.uniform(0., 5., 18)))
    K = (Q * spectrum).dot(Q.T)
    assert_allclose(max_eigenvalue(K), np.linalg.eigvalsh(K)[-1], rtol=1e-4)

    theta = empirical_ntk(_tiny(1), _inputs(8), mode='trace')
    assert_allclose(max_eigenvalue(theta, tol=1e-10),
                    np.linalg.eigvalsh(theta.entries)[-1], rtol=1e-4)


def test_power_iteration_limit():
    try:
        max_eigenvalue(np.diag([1., 2., 5.]), max_iter=1)
    except ConvergenceError:
        pass
    else:
        assert False
    K = np.diag([1., 1. - 1e-9, 0.5])
    assert_allclose(max_eigenvalue(K), 1., rtol=1e-6)


def test_solve_kernel():
    K = np.diag([2., 4.])
    u, eps = solve_kernel(K, np.array([2., 4.]))
    assert eps == config['ridge_start']
    assert_allclose(u, [1., 1.], rtol=1e-7)

    # singular kernels need a ridge but still decompose
    u, eps = solve_kernel(np.ones((3, 3)), np.ones(3))
    assert eps <= config['ridge_max']


def test_identity_kernel_dynamics():
    N, C, eta = 4, 2, 0.5
    theta = TangentKernel(np.eye(N * C), N, N, C)
    rng = derive_rng(0, 'dynamics')
    f0, Y = rng.standard_normal((N, C)), rng.standard_normal((N, C))
    state = LinearizedState(theta, f0, Y, eta)
    for t in (1., 10., 1000.):
        decay = np.exp(-eta * t / N)
        assert_allclose(linearized_output(state, theta, f0, t),
                        Y + decay * (f0 - Y), rtol=1e-12, atol=1e-12)

    discrete = LinearizedState(theta, f0, Y, eta, discrete=True)
    for t in (1, 5):
        decay = (1. - eta / N) ** t
        assert_allclose(linearized_output(discrete, theta, f0, t),
                        Y + decay * (f0 - Y), rtol=1e-12, atol=1e-12)


def test_linearized_limits():
    net = _tiny(2)
    X = _inputs(5)
    Y = derive_rng(1, 'targets').standard_normal((5, 3))
    for mode in ('full', 'trace'):
        theta = empirical_ntk(net, X, mode=mode)
        f0 = forward(net, X).outputs
        state = LinearizedState(theta, f0, Y, eta=1.)
        assert_array_equal(linearized_output(state, theta, f0, 0), f0)
        assert_allclose(linearized_output(state, theta, f0, np.inf), Y,
                        atol=1e-3)


def test_regression_interpolates():
    net = _tiny(4)
    X_train, X_test = _inputs(5), _inputs(3, seed=1)
    Y = derive_rng(1, 'targets').standard_normal((5, 3))
    for mode in ('full', 'trace'):
        theta_train, theta_test = train_test_kernels(net, X_train, X_test,
                                                     mode=mode)
        assert_allclose(ntk_regression(theta_train, theta_train, Y), Y,
                        atol=1e-3)
        predictions, eps = ntk_regression(theta_test, theta_train, Y,
                                          full_output=True)
        assert predictions.shape == (3, 3)
        assert eps >= config['ridge_start']


def test_regression_shapes():
    theta = TangentKernel(np.eye(6), 3, 3, 2)
    try:
        ntk_regression(theta, theta, np.zeros((2, 2)))
    except ShapeError:
        pass
    else:
        assert False
    try:
        ntk_regression(theta.to_trace(), theta, np.zeros((3, 2)))
    except ShapeError:
        pass
    else:
        assert False
