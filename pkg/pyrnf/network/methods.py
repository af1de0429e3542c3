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
Forward and backward passes of a :class:`pyrnf.network.NetworkModel`

A dense layer computes ``h = x W + b`` with the effective parameters of
its :class:`pyrnf.fields.WeightBundle` and ``x' = relu(h)`` (the readout
is linear). Pooling layers take the maximum over windows of the neuron
index.

:func:`backprop_signals` propagates arbitrary stacks of output cotangents
and is shared by :func:`backward` and the tangent kernel assembly.
"""

import numpy as np

from pyrnf.exceptions import ShapeError, StaleTraceError
from pyrnf.network import ForwardTrace


def max_pool_forward(x, window=2, stride=2):
    """
    max pooling over the last axis

    Args:

    * x (numpy.array):
        a vector or a batch (..., n_in)

    Kwargs:

    * window, stride (int):
        pooling geometry

    Returns:

        pooled values and the absolute argmax indices, both of shape
        (..., n_out); ties are broken toward the lowest index
    """
    x = np.asarray(x, dtype=np.float64)
    n_in = x.shape[-1]
    if not 1 <= window <= n_in or stride < 1:
        raise ShapeError('cannot pool {} neurons with window={} '
                         'stride={}'.format(n_in, window, stride))
    n_out = (n_in - window) // stride + 1
    starts = np.arange(n_out) * stride
    windows = x[..., starts[:, np.newaxis] + np.arange(window)]
    # argmax returns the first occurrence
    offsets = np.argmax(windows, axis=-1)
    indices = starts + offsets
    pooled = np.take_along_axis(windows, offsets[..., np.newaxis],
                                axis=-1)[..., 0]
    return pooled, indices


def max_pool_backward(cotangent, indices, n_in):
    """
    route a cotangent of the pooled layer back to the argmax positions

    Args:

    * cotangent (numpy.array):
        (N, ..., n_out) with the leading axis matching indices

    * indices (numpy.array):
        (N, n_out) argmax indices from :func:`max_pool_forward`

    * n_in (int):
        width of the pooled layer's input

    Returns:

        numpy.array of shape (N, ..., n_in)
    """
    cotangent = np.asarray(cotangent, dtype=np.float64)
    indices = np.asarray(indices)
    extra = cotangent.ndim - indices.ndim
    target = indices.reshape(indices.shape[:1] + (1, ) * extra +
                             indices.shape[1:])
    target = np.broadcast_to(target, cotangent.shape)
    grid = np.indices(cotangent.shape, sparse=True)
    ret = np.zeros(cotangent.shape[:-1] + (n_in, ))
    # overlapping windows may select the same neuron more than once
    np.add.at(ret, tuple(grid[:-1]) + (target, ), cotangent)
    return ret


def _as_batch(net, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    if X.ndim != 2 or X.shape[1] != net.input_width:
        raise ShapeError('expected inputs of width {}, got shape {}'.format(
            net.input_width, X.shape))
    return X


def forward(net, X):
    """
    forward pass

    Args:

    * net (:class:`pyrnf.network.NetworkModel`):
        the network

    * X (numpy.array):
        (N, input_width) batch or a single flattened image

    Returns:

        :class:`pyrnf.network.ForwardTrace`
    """
    x = _as_batch(net, X)
    inputs, pre, post, argmax = [], [], [], []
    for spec, bundle in zip(net.layers, net.params):
        inputs.append(x)
        if spec.is_dense:
            h = x.dot(bundle.W) + bundle.b
            x = np.maximum(h, 0.) if spec.activation == 'relu' else h
            pre.append(h)
            argmax.append(None)
        else:
            x, idx = max_pool_forward(x, spec.pool_window, spec.pool_stride)
            pre.append(None)
            argmax.append(idx)
        post.append(x)
    return ForwardTrace(inputs, pre, post, argmax, net.version)


def _check_trace(net, trace):
    if trace.version != net.version or len(trace.post) != len(net.layers):
        raise StaleTraceError(
            'trace was recorded for parameter version {}, network is at '
            '{}'.format(trace.version, net.version))


def backprop_signals(net, trace, cotangent):
    """
    backpropagate output cotangents through the network

    Args:

    * net (:class:`pyrnf.network.NetworkModel`):
        the network the trace was recorded with

    * trace (:class:`pyrnf.network.ForwardTrace`):
        result of :func:`forward`

    * cotangent (numpy.array):
        (N, C) or a stack (N, K, C) of output cotangents

    Returns:

        list with the signal dL/dh of every dense layer, shaped like the
        cotangent with C replaced by the layer width, and None for pooling
        layers
    """
    _check_trace(net, trace)
    g = np.asarray(cotangent, dtype=np.float64)
    N = trace.n_examples
    if g.ndim not in (2, 3) or g.shape[0] != N or \
            g.shape[-1] != net.n_classes:
        raise ShapeError('cotangent shape {} does not match outputs '
                         '{}'.format(g.shape, trace.outputs.shape))
    extra = g.ndim - 2
    signals = [None] * len(net.layers)
    for index in reversed(range(len(net.layers))):
        spec = net.layers[index]
        if spec.is_dense:
            if spec.activation == 'relu':
                active = trace.pre[index] > 0.
                g = g * active.reshape(
                    (N, ) + (1, ) * extra + active.shape[1:])
            signals[index] = g
            if index:
                g = g.dot(net.params[index].W.T)
        else:
            g = max_pool_backward(g, trace.argmax[index], spec.n_in)
    return signals


def class_signals(net, trace):
    """
    signals of every layer for the unit cotangents of all C outputs

    Returns:

        list of (N, C, n_out) arrays (None for pooling layers)
    """
    N, C = trace.outputs.shape
    unit = np.broadcast_to(np.eye(C), (N, C, C))
    return backprop_signals(net, trace, unit)


def backward(net, trace, cotangent):
    """
    reverse-mode gradients of <cotangent, outputs>

    The gradients are taken with respect to the trainable W_tilde and
    beta, i.e. they carry the fixed factors sigma_w / sqrt(n_in) * R and
    sigma_b.

    Args:

    * net (:class:`pyrnf.network.NetworkModel`):
        the network

    * trace (:class:`pyrnf.network.ForwardTrace`):
        result of :func:`forward` at the current parameters

    * cotangent (numpy.array):
        (N, C) output cotangent, e.g. dL/df

    Returns:

        (grads, signals): grads holds (dW_tilde, dbeta) for every dense
        layer and None for pooling layers, signals as returned by
        :func:`backprop_signals`
    """
    cotangent = np.asarray(cotangent, dtype=np.float64)
    if cotangent.ndim != 2:
        raise ShapeError('cotangent must be a (N, C) matrix')
    signals = backprop_signals(net, trace, cotangent)
    grads = []
    for index, bundle in enumerate(net.params):
        if bundle is None:
            grads.append(None)
            continue
        delta = signals[index]
        dW = bundle.scale * bundle.R * trace.inputs[index].T.dot(delta)
        grads.append((dW, bundle.sigma_b * delta.sum(axis=0)))
    return grads, signals


def flat_gradient(grads):
    """
    concatenate gradients in the order of
    :meth:`pyrnf.network.NetworkModel.parameter_vector`
    """
    return np.concatenate([np.concatenate((dW.ravel(), dbeta))
                           for dW, dbeta in
                           (grad for grad in grads if grad is not None)])
