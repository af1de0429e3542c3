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

from pyrnf.exceptions import ConfigurationError, ShapeError

POSITIVE = .9
NEGATIVE = -.1


def encode_labels(classes, n_classes=10, first=1):
    """
    regression targets y = -0.1 * 1 + e_c

    Args:

    * classes (int or array of int):
        class number(s) counted from ``first``

    Kwargs:

    * n_classes (int):
        number of classes C

    * first (int):
        number of the first class; 1 for classes 1..C, 0 for MNIST digits

    Returns:

        (C, ) vector for a scalar class, (N, C) matrix otherwise
    """
    scalar = np.isscalar(classes)
    position = np.atleast_1d(np.asarray(classes)).astype(np.int64) - first
    if position.size and (position.min() < 0 or
                          position.max() >= n_classes):
        raise ConfigurationError('classes must lie in {}..{}'.format(
            first, first + n_classes - 1))
    Y = np.full((position.size, n_classes), NEGATIVE)
    Y[np.arange(position.size), position] = POSITIVE
    return Y[0] if scalar else Y


def mse_loss(f, Y, per='example'):
    """
    mean squared error

    Args:

    * f, Y (numpy.array):
        (N, C) outputs and targets

    Kwargs:

    * per (str):
        example: ||f - Y||^2 / (2 N), the training loss;
        entry: 0.5 * mean((f - Y)^2), the reported test loss

    Returns:

        float
    """
    f = np.asarray(f, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if f.shape != Y.shape:
        raise ShapeError('outputs {} and targets {} differ in shape'.format(
            f.shape, Y.shape))
    residual = f - Y
    if residual.ndim < 2:
        residual = residual.reshape(1, -1)
    squares = np.sum(residual ** 2)
    if per == 'example':
        return float(squares / (2. * residual.shape[0]))
    if per == 'entry':
        return float(squares / (2. * residual.size))
    raise ConfigurationError("loss normalization '{}' unknown".format(per))


def accuracy(f, Y):
    """
    fraction of examples whose largest output is the target class
    """
    f = np.atleast_2d(f)
    Y = np.atleast_2d(Y)
    if f.shape != Y.shape:
        raise ShapeError('outputs {} and targets {} differ in shape'.format(
            f.shape, Y.shape))
    return float(np.mean(np.argmax(f, axis=1) == np.argmax(Y, axis=1)))


def log_schedule(steps, n_points=60):
    """
    geometrically spaced steps 0 < ... < steps, starting with 0

    Returns:

        sorted list of unique ints
    """
    if steps < 1:
        raise ConfigurationError('need at least one training step')
    if n_points < 2:
        return [0, int(steps)]
    grid = np.unique(np.round(np.geomspace(1, steps, n_points - 1)))
    return [0] + [int(step) for step in grid]
