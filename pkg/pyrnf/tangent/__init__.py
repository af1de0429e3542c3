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
Empirical neural tangent kernels and the linearized training dynamics

A :class:`TangentKernel` holds the kernel between two sets of inputs
either in the ``full`` layout, one row and column per (example, class)
pair in row-major order, or in the ``trace`` layout, one row and column
per example holding the sum over the class diagonal blocks.
"""

import numpy as np

from pyrnf.exceptions import ConfigurationError, ShapeError

MODES = ('full', 'trace')


class TangentKernel(object):

    """
    An empirical tangent kernel Theta(X_rows, X_cols)
    """

    def __init__(self, entries, n_rows, n_cols, n_classes, mode='full'):
        """
        Args:

        * entries (numpy.array):
            (n_rows * C, n_cols * C) for mode full, (n_rows, n_cols) for
            mode trace

        * n_rows, n_cols (int):
            number of examples on either side

        * n_classes (int):
            number of network outputs C

        Kwargs:

        * mode (str):
            full or trace
        """
        if mode not in MODES:
            raise ConfigurationError("kernel mode '{}' not supported".format(
                mode))
        entries = np.asarray(entries, dtype=np.float64)
        factor = n_classes if mode == 'full' else 1
        if entries.shape != (n_rows * factor, n_cols * factor):
            raise ShapeError('kernel entries of shape {} do not match {}x{} '
                             'examples with {} classes ({})'.format(
                                 entries.shape, n_rows, n_cols, n_classes,
                                 mode))
        self.entries = entries
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.n_classes = int(n_classes)
        self.mode = mode

    def __repr__(self):
        return "<pyrnf 'TangentKernel' {} {}x{} examples, {} classes>".format(
            self.mode, self.n_rows, self.n_cols, self.n_classes)

    @property
    def shape(self):
        return self.entries.shape

    @property
    def is_square(self):
        return self.n_rows == self.n_cols

    def block(self, i, j):
        """
        the (C, C) block of examples i and j (mode full only)
        """
        if self.mode != 'full':
            raise ConfigurationError('class blocks need a full kernel')
        C = self.n_classes
        return self.entries[i * C:(i + 1) * C, j * C:(j + 1) * C]

    def class_trace(self):
        """
        (n_rows, n_cols) matrix of the traces of the class blocks
        """
        if self.mode == 'trace':
            return self.entries
        C = self.n_classes
        blocks = self.entries.reshape(self.n_rows, C, self.n_cols, C)
        return np.einsum('ikjk->ij', blocks)

    def to_trace(self):
        if self.mode == 'trace':
            return self
        return TangentKernel(self.class_trace(), self.n_rows, self.n_cols,
                             self.n_classes, 'trace')

    def min_eigenvalue(self):
        if not self.is_square:
            raise ShapeError('eigenvalues need a square kernel')
        return float(np.linalg.eigvalsh(self.entries)[0])

    def is_psd(self, tol=1e-8):
        """
        True if the smallest eigenvalue is at least -tol * trace / dim
        """
        dim = self.entries.shape[0]
        bound = -tol * np.trace(self.entries) / dim
        return self.min_eigenvalue() >= bound

    def meta(self):
        return {'n_rows': self.n_rows, 'n_cols': self.n_cols,
                'n_classes': self.n_classes, 'mode': self.mode,
                'layout': 'example-major' if self.mode == 'full'
                else 'class-trace'}


class LinearizedState(object):

    """
    The first order Taylor model of a network around its initialization,
    trained on (X, Y) with the loss (1 / 2N) ||f - Y||^2

    The symmetric eigendecomposition of the training kernel is computed
    once on first use.
    """

    def __init__(self, theta0, f0_train, Y, eta, discrete=False):
        """
        Args:

        * theta0 (:class:`TangentKernel`):
            Theta(X, X) at initialization

        * f0_train (numpy.array):
            (N, C) network outputs at initialization

        * Y (numpy.array):
            (N, C) encoded targets

        * eta (float):
            learning rate

        Kwargs:

        * discrete (bool):
            use the gradient descent recursion instead of gradient flow;
            times are then step counts
        """
        if not theta0.is_square:
            raise ShapeError('the training kernel must be square')
        if eta <= 0:
            raise ConfigurationError('learning rate must be positive')
        self.theta0 = theta0
        self.f0_train = np.asarray(f0_train, dtype=np.float64)
        self.Y = np.asarray(Y, dtype=np.float64)
        expected = (theta0.n_rows, theta0.n_classes)
        if self.f0_train.shape != expected or self.Y.shape != expected:
            raise ShapeError('outputs and targets must have shape {}'.format(
                expected))
        self.eta = float(eta)
        self.discrete = discrete
        self._eigh = None

    @property
    def n_train(self):
        return self.theta0.n_rows

    @property
    def residual(self):
        """
        f0(X) - Y in the layout of the kernel
        """
        r = self.f0_train - self.Y
        return r.ravel() if self.theta0.mode == 'full' else r

    @property
    def eigh(self):
        if self._eigh is None:
            self._eigh = np.linalg.eigh(self.theta0.entries)
        return self._eigh
