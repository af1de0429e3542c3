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

from pyrnf.exceptions import ConfigurationError
from pyrnf.fields import CovarianceSpec, ReceptiveFieldSpec, WeightBundle
from pyrnf.fields.kernels import discrete_covariance
from pyrnf.fields.sampling import (derive_rng, derive_seed, receptive_mask,
                                   sample_bias, sample_correlated_weights)

NONE = ReceptiveFieldSpec('none')


def test_derive_seed():
    assert derive_seed(0, 'layer', 1) == derive_seed(0, 'layer', 1)
    assert derive_seed(0, 'layer', 1) != derive_seed(0, 'layer', 2)
    assert derive_seed(1, 'layer', 1) != derive_seed(0, 'layer', 1)
    assert 0 <= derive_seed(2 ** 40, 'x') < 2 ** 63
    assert_array_equal(derive_rng(3, 'a').standard_normal(5),
                       derive_rng(3, 'a').standard_normal(5))


def test_gaussian_mask():
    spec = ReceptiveFieldSpec('gaussian_filter', 0.3)
    R = receptive_mask(8, 4, spec)
    assert R.shape == (4, 8)
    # i / n_out == j / n_in for i = 2 j
    for j in range(1, 5):
        assert R[j - 1, 2 * j - 1] == 1.0
    assert np.all(R > 0) and np.all(R <= 1)


def test_mexican_hat_mask():
    sigma_r = 0.25
    R = receptive_mask(4, 4, ReceptiveFieldSpec('mexican_hat', sigma_r))
    peak = 2. / (np.sqrt(3. * sigma_r) * np.pi ** .25)
    assert_allclose(np.diag(R), peak, rtol=1e-14)
    # |i / 4 - j / 4| = sigma_r for neighbouring neurons
    assert abs(R[0, 1]) < 1e-14
    assert np.all(R[0, 2:] < 0)


def test_no_mask():
    assert_array_equal(receptive_mask(3, 5, NONE), np.ones((5, 3)))


def test_sample_bias():
    assert_array_equal(sample_bias(5, 0., derive_rng(0)), np.zeros(5))
    b = sample_bias(10000, 0.1, derive_rng(1, 'bias'))
    assert 0.097 <= b.std() <= 0.103
    assert_array_equal(sample_bias(20, 0.1, derive_rng(7)),
                       sample_bias(20, 0.1, derive_rng(7)))


def test_independent_columns():
    n_in, n_out = 20, 10000
    bundle = sample_correlated_weights(n_in, n_out,
                                       CovarianceSpec('independent'), NONE,
                                       1., derive_rng(0, 'mc'))
    empirical = bundle.W_tilde.dot(bundle.W_tilde.T) / n_out
    assert np.abs(empirical - np.eye(n_in)).max() < 0.06


def test_correlated_columns():
    n_in, n_out = 100, 10000
    cov = CovarianceSpec('gaussian', 0.01)
    bundle = sample_correlated_weights(n_in, n_out, cov, NONE, 1.,
                                       derive_rng(1, 'mc'))
    empirical = bundle.W_tilde.dot(bundle.W_tilde.T) / n_out
    sigma = discrete_covariance(n_in, cov)
    for i in range(n_in - 1):
        assert abs(empirical[i, i + 1] - np.exp(-.5)) < 0.06
    assert np.abs(empirical - sigma).max() < 0.06


def test_quadrature_columns():
    # lattice scale two samples through the padded quadrature factor
    n_in, n_out = 100, 10000
    cov = CovarianceSpec('gaussian', 0.02)
    bundle = sample_correlated_weights(n_in, n_out, cov, NONE, 1.,
                                       derive_rng(8, 'mc'))
    empirical = bundle.W_tilde.dot(bundle.W_tilde.T) / n_out
    assert np.abs(empirical - discrete_covariance(n_in, cov)).max() < 0.06


def test_small_factor_covariance():
    rng = derive_rng(2, 'factor')
    A = rng.standard_normal((8, 8))
    A /= np.linalg.norm(A, axis=1)[:, np.newaxis]
    n_out = 20000
    bundle = sample_correlated_weights(8, n_out,
                                       CovarianceSpec('gaussian', 0.1), NONE,
                                       1., derive_rng(3), factor=A)
    empirical = bundle.W_tilde.dot(bundle.W_tilde.T) / n_out
    assert np.abs(empirical - A.dot(A.T)).max() < 5. / np.sqrt(n_out)


def test_rectangular_factor():
    A = np.hstack([np.eye(4), np.eye(4)]) / np.sqrt(2.)
    bundle = sample_correlated_weights(4, 6, CovarianceSpec('gaussian', .1),
                                       NONE, 1., derive_rng(9), factor=A)
    assert bundle.W_tilde.shape == (4, 6)
    try:
        sample_correlated_weights(4, 6, CovarianceSpec('gaussian', .1), NONE,
                                  1., derive_rng(9), factor=A.T)
    except ConfigurationError:
        pass
    else:
        assert False


def test_weight_variance():
    n_in = 50
    bundle = sample_correlated_weights(n_in, 4000,
                                       CovarianceSpec('independent'), NONE,
                                       1., derive_rng(4))
    assert bundle.unmasked
    assert abs(bundle.W.var() - 1. / n_in) < 0.05 / n_in


def test_determinism():
    args = (30, 12, CovarianceSpec('matern', 0.1, nu=0.5),
            ReceptiveFieldSpec('gaussian_filter', 0.5), 1.)
    first = sample_correlated_weights(*args, rng=derive_rng(5, 'layer', 0))
    second = sample_correlated_weights(*args, rng=derive_rng(5, 'layer', 0))
    assert_array_equal(first.W_tilde, second.W_tilde)
    assert_array_equal(first.beta, second.beta)


def test_mask_is_fixed():
    rf = ReceptiveFieldSpec('gaussian_filter', 0.2)
    bundle = sample_correlated_weights(10, 6, CovarianceSpec('independent'),
                                       rf, 1.5, derive_rng(6), sigma_b=0.2)
    R = bundle.R.copy()
    for step in range(3):
        bundle.W_tilde -= 0.1 * np.ones_like(bundle.W_tilde)
    assert_array_equal(bundle.R, R)
    assert_allclose(bundle.W / bundle.W_tilde, 1.5 / np.sqrt(10) * R,
                    rtol=1e-12)
    assert_allclose(bundle.b, 0.2 * bundle.beta)


def test_weight_bundle_shapes():
    try:
        WeightBundle(np.zeros((3, 2)), np.ones((2, 3)), np.zeros(2), 1., .1)
    except ValueError:
        pass
    else:
        assert False
