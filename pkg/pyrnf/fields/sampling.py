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
Receptive field masks and sampling of correlated initial weights

A layer from ``n_in`` to ``n_out`` neurons stores its weights as an
``(n_in, n_out)`` matrix so that the pre-activation is ``h = x W + b``.
Every column of the trainable sample ``W_tilde`` is an independent draw
``A omega`` with ``omega ~ N(0, I)`` and hence distributed as
``N(0, A A^T)`` over the presynaptic index.

All randomness is derived from a root seed and a component path with
:func:`derive_seed`, so independent components can be sampled in any
order or in parallel with reproducible results.
"""

import hashlib

import numpy as np

from pyrnf import config
from pyrnf.exceptions import ConfigurationError
from pyrnf.fields import CovarianceSpec, ReceptiveFieldSpec, WeightBundle
from pyrnf.fields.kernels import covariance_factor


def derive_seed(seed, *path):
    """
    derive a 64 bit child seed from a root seed and a component path

    Args:

    * seed (int):
        the root seed

    * path:
        any number of path components, e.g. ('model', 1, 'layer', 0)

    Returns:

        int in [0, 2**63)
    """
    key = '/'.join([str(int(seed))] + [str(p) for p in path])
    digest = hashlib.sha256(key.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'big') >> 1


def derive_rng(seed, *path):
    """
    a :class:`numpy.random.Generator` (PCG64) for the given component path
    """
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *path)))


def receptive_mask(n_out, n_in, spec):
    """
    receptive field mask of a layer

    The entry for presynaptic neuron j and postsynaptic neuron i (both
    counted from 1) is evaluated at u = i / n_out - j / n_in:

    * gaussian_filter: exp(-(u / sigma_r)^2 / 2)

    * mexican_hat: 2 / (sqrt(3 sigma_r) pi^(1/4)) (1 - (u / sigma_r)^2)
      exp(-(u / sigma_r)^2 / 2)

    Args:

    * n_out (int):
        number of postsynaptic neurons

    * n_in (int):
        number of presynaptic neurons

    * spec (:class:`pyrnf.fields.ReceptiveFieldSpec`):
        the receptive field

    Returns:

        (n_in, n_out) numpy.array; all ones for the family none
    """
    if n_out < 1 or n_in < 1:
        raise ConfigurationError('layer sizes must be positive')
    if spec.family == 'none':
        return np.ones((n_in, n_out))
    post = np.arange(1, n_out + 1) / float(n_out)
    pre = np.arange(1, n_in + 1) / float(n_in)
    z2 = ((post[np.newaxis, :] - pre[:, np.newaxis]) / spec.sigma_r) ** 2
    if spec.family == 'gaussian_filter':
        return np.exp(-z2 / 2.)
    return 2. / (np.sqrt(3. * spec.sigma_r) * np.pi ** .25) * \
        (1. - z2) * np.exp(-z2 / 2.)


def sample_bias(n, sigma_b, rng):
    """
    bias vector sigma_b * beta with beta ~ N(0, 1) i.i.d.
    """
    if n < 1:
        raise ConfigurationError('bias length must be positive')
    return sigma_b * rng.standard_normal(n)


def sample_correlated_weights(n_in, n_out, cov, rf, sigma_w, rng,
                              sigma_b=None, factor=None,
                              factor_method='auto'):
    """
    sample the parameters of one masked dense layer

    Args:

    * n_in, n_out (int):
        number of pre- and postsynaptic neurons

    * cov (:class:`pyrnf.fields.CovarianceSpec`):
        covariance along the presynaptic index

    * rf (:class:`pyrnf.fields.ReceptiveFieldSpec`):
        the receptive field mask

    * sigma_w (float):
        weight scale of the NTK parameterization

    * rng (:class:`numpy.random.Generator`):
        source of randomness; weights are drawn before the bias

    Kwargs:

    * sigma_b (float):
        bias scale (default: ``pyrnf.config['sigma_b']``)

    * factor (numpy.array):
        a precomputed factor matrix for cov with n_in rows; its column
        count sets the length of the standard normal draws

    * factor_method (str):
        see :func:`pyrnf.fields.kernels.covariance_factor`

    Returns:

        :class:`pyrnf.fields.WeightBundle`
    """
    if sigma_b is None:
        sigma_b = config['sigma_b']
    if not isinstance(cov, CovarianceSpec):
        cov = CovarianceSpec.from_dict(cov)
    if not isinstance(rf, ReceptiveFieldSpec):
        rf = ReceptiveFieldSpec.from_dict(rf)
    if cov.is_independent:
        W_tilde = rng.standard_normal((n_in, n_out))
    else:
        if factor is None:
            factor = covariance_factor(n_in, cov, method=factor_method)
        if factor.ndim != 2 or factor.shape[0] != n_in:
            raise ConfigurationError(
                'factor shape {} does not match {} inputs'.format(
                    factor.shape, n_in))
        W_tilde = factor.dot(rng.standard_normal((factor.shape[1], n_out)))
    beta = rng.standard_normal(n_out)
    return WeightBundle(W_tilde, receptive_mask(n_out, n_in, rf), beta,
                        sigma_w, sigma_b)
