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
Stationary covariance functions on the 1-torus, their discretized
covariance matrices and square-root factors

For a lattice of ``n`` neurons with spacing ``1/n`` the kernels only
depend on the lattice offset ``|i - i'|`` and the lattice scale
``sigma_s * n``. All matrices are therefore symmetric Toeplitz matrices
built with :func:`scipy.linalg.toeplitz`.

The quadrature factor follows from the Fourier square root of the
spectral density on the real line, while kernel values are periodized
on the torus by a truncated sum over integer translates. Both agree for
correlation scales well below the torus length.
"""

import logging

import numpy as np
from scipy import linalg
from scipy.integrate import quad
from scipy.special import gamma, kv

from pyrnf.exceptions import ConfigurationError, DecompositionError

# below this lattice scale the quadrature factor is not resolved
MIN_QUADRATURE_SCALE = 1.0
CHOLESKY_JITTER = 1e-10
# correlation lengths covered by the padding of the quadrature nodes
QUADRATURE_PAD_SCALES = 8.
# relative Frobenius residual accepted from the padded quadrature factor
QUADRATURE_TOLERANCE = 1e-3


def _matern_closed_form(z, nu):
    """
    Matern correlation as a function of z = |x| / sigma_s for the
    half-integer smoothness values
    """
    if nu == 0.5:
        return np.exp(-z)
    elif nu == 1.5:
        sz = np.sqrt(3.) * z
        return (1. + sz) * np.exp(-sz)
    elif nu == 2.5:
        sz = np.sqrt(5.) * z
        return (1. + sz + sz ** 2 / 3.) * np.exp(-sz)
    raise ConfigurationError('no closed form for nu={}'.format(nu))


def _matern_bessel(z, nu):
    """
    Matern correlation 2^(1-nu) / Gamma(nu) * u^nu * K_nu(u) with
    u = sqrt(2 nu) * z, evaluated with the modified Bessel function of
    the second kind
    """
    u = np.sqrt(2. * nu) * np.asarray(z, dtype=np.float64)
    ret = np.ones_like(u)
    positive = u > 0
    up = u[positive]
    ret[positive] = 2. ** (1. - nu) / gamma(nu) * up ** nu * kv(nu, up)
    return ret


def _raw_kernel(dist, spec):
    """
    unnormalized stationary kernel on the real line
    """
    dist = np.abs(np.asarray(dist, dtype=np.float64))
    if spec.family == 'gaussian':
        return np.exp(-dist ** 2 / (2. * spec.sigma_s ** 2))
    elif spec.family == 'matern':
        z = dist / spec.sigma_s
        if spec.nu in (0.5, 1.5, 2.5):
            return _matern_closed_form(z, spec.nu)
        if not spec.numeric_bessel:
            raise ConfigurationError(
                'matern smoothness nu={} needs numeric_bessel'.format(
                    spec.nu))
        return _matern_bessel(z, spec.nu)
    elif spec.family == 'independent':
        return (dist == 0).astype(np.float64)
    raise ConfigurationError('unknown family {}'.format(spec.family))


def _wrapped_kernel(dist, spec):
    shifts = np.arange(-spec.wrap_terms, spec.wrap_terms + 1)
    dist = np.asarray(dist, dtype=np.float64)
    return _raw_kernel(dist[..., np.newaxis] + shifts, spec).sum(axis=-1)


def covariance_value(dist, spec):
    """
    kernel value on the torus for the given torus distance(s)

    The kernel is the sum over ``2 * wrap_terms + 1`` integer translates
    normalized such that the value at distance zero is one.

    Args:

    * dist (float or numpy.array):
        torus distance(s) in [0, 1/2]

    * spec (:class:`pyrnf.fields.CovarianceSpec`):
        the covariance specification

    Returns:

        float or numpy.array of the same shape as dist
    """
    spec.validate()
    dist = np.asarray(dist, dtype=np.float64)
    if np.any(dist < 0) or np.any(dist > .5):
        raise ConfigurationError('torus distances must lie in [0, 1/2]')
    if spec.is_independent:
        ret = (dist == 0).astype(np.float64)
    else:
        ret = _wrapped_kernel(dist, spec) / _wrapped_kernel(0., spec)
    if ret.ndim == 0:
        return float(ret)
    return ret


def torus_offsets(n):
    """
    torus lattice distance of offsets 0..n-1 in units of the spacing
    """
    k = np.arange(n)
    return np.minimum(k, n - k)


def discrete_covariance(n, spec, periodic=False):
    """
    covariance matrix of n neurons placed at i/n, i = 1..n

    Args:

    * n (int):
        number of neurons (at least 2)

    * spec (:class:`pyrnf.fields.CovarianceSpec`):
        the covariance specification

    Kwargs:

    * periodic (boolean):
        use torus distances and the wrap sum instead of the lattice
        distance on the real line (default: False)

    Returns:

        symmetric (n, n) numpy.array with unit diagonal
    """
    if n < 2:
        raise ConfigurationError('need at least 2 neurons, got {}'.format(n))
    spec.validate()
    if spec.is_independent:
        return np.eye(n)
    if periodic:
        column = covariance_value(torus_offsets(n) / float(n), spec)
    else:
        column = _raw_kernel(np.arange(n) / float(n), spec) / \
            _raw_kernel(0., spec)
    return linalg.toeplitz(column)


def _gaussian_factor_column(n, scale):
    k = np.arange(n, dtype=np.float64)
    return (2. / (np.pi * scale ** 2)) ** .25 * np.exp(-k ** 2 / scale ** 2)


def matern_root(r, nu, scale):
    """
    convolution square root g of the Matern kernel on the real line,
    i.e. the integral of g(x - y) g(x' - y) dy is the Matern correlation
    of x - x'

    The square root of the spectral density is again of Matern type
    with Bessel order mu = nu / 2 - 1/4.

    Args:

    * r (numpy.array):
        non-negative distances

    * nu (float):
        Matern smoothness

    * scale (float):
        correlation scale in the units of r

    Returns:

        numpy.array of g(r); r = 0 is only finite for nu > 1/2
    """
    r = np.asarray(r, dtype=np.float64)
    p = nu / 2. + .25
    mu = p - .5
    a = np.sqrt(2. * nu) / scale
    c = 2. * scale * np.sqrt(np.pi) * (2. * nu) ** nu * \
        gamma(nu + .5) / gamma(nu)
    prefactor = np.sqrt(c) * scale ** (-2. * p) / (np.sqrt(np.pi) * gamma(p))
    ret = np.empty_like(r)
    positive = r > 0
    rp = r[positive]
    if mu == .5:
        bessel = np.sqrt(np.pi / (2. * a * rp)) * np.exp(-a * rp)
    else:
        bessel = kv(mu, a * rp)
    ret[positive] = prefactor * (rp / (2. * a)) ** mu * bessel
    if mu > 0:
        ret[~positive] = prefactor * gamma(mu) / (2. * a ** (2. * mu))
    else:
        ret[~positive] = np.inf
    return ret


def _matern_factor_column(n, nu, scale):
    column = matern_root(np.arange(n, dtype=np.float64), nu, scale)
    if not np.isfinite(column[0]):
        # integrable singularity at zero lag: use the cell average
        integral, _ = quad(lambda r: matern_root(np.array([r]), nu,
                                                 scale)[0],
                           0., .5, limit=200)
        column[0] = 2. * integral
    return column


def factor_matrix(n, spec, pad=0):
    """
    closed-form quadrature factor A with Sigma ~ A A^T

    The factor samples the convolution square root of the kernel on the
    lattice: A_ij = g(x_i - y_j) sqrt(dy) with dy = 1/n. For the
    Gaussian kernel with lattice scale s = sigma_s * n this is::

        A_ij = (2 / (pi s^2))^(1/4) exp(-|i - j|^2 / s^2)

    Args:

    * n (int):
        number of neurons (at least 2)

    * spec (:class:`pyrnf.fields.CovarianceSpec`):
        the covariance specification

    Kwargs:

    * pad (int):
        number of additional quadrature nodes y_j beyond either end of
        the lattice (default: 0). Without padding the rows near the ends
        miss the kernel mass from outside the lattice.

    Returns:

        (n, n + 2 * pad) numpy.array
    """
    if n < 2:
        raise ConfigurationError('need at least 2 neurons, got {}'.format(n))
    if pad < 0:
        raise ConfigurationError('pad must be non-negative')
    spec.validate()
    if spec.is_independent:
        return np.eye(n, n + 2 * pad, pad)
    scale = spec.sigma_s * n
    if spec.family == 'gaussian':
        values = _gaussian_factor_column(n + pad, scale)
    else:
        values = _matern_factor_column(n + pad, spec.nu, scale)
    # node y_j sits at lattice offset j - pad
    return linalg.toeplitz(values[pad:pad + n],
                           values[np.abs(pad - np.arange(n + 2 * pad))])


def quadrature_pad(n, spec):
    """
    padding of the quadrature nodes covering QUADRATURE_PAD_SCALES
    correlation lengths
    """
    if spec.is_independent:
        return 0
    return int(np.ceil(QUADRATURE_PAD_SCALES * spec.sigma_s * n))


def cholesky_factor(sigma):
    """
    lower triangular Cholesky factor L with L L^T = sigma

    If the plain decomposition fails a jitter of 1e-10 on the diagonal
    is added once.

    Args:

    * sigma (numpy.array):
        symmetric positive (semi)definite matrix

    Returns:

        lower triangular numpy.array
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    try:
        return linalg.cholesky(sigma, lower=True)
    except linalg.LinAlgError:
        logging.debug('Cholesky failed, adding jitter {}'.format(
            CHOLESKY_JITTER))
    try:
        return linalg.cholesky(
            sigma + CHOLESKY_JITTER * np.eye(sigma.shape[0]), lower=True)
    except linalg.LinAlgError as err:
        raise DecompositionError(
            'covariance is not positive definite: {}'.format(err))


def covariance_factor(n, spec, method='auto'):
    """
    factor matrix A used for sampling correlated weights, A A^T
    approximates the lattice covariance of :func:`discrete_covariance`

    Kwargs:

    * method (str):
        quadrature, cholesky or auto (default). The quadrature factor is
        padded by :func:`quadrature_pad` nodes on either side and thus
        has n + 2 * pad columns. Auto takes the padded quadrature factor
        when its relative residual is at most QUADRATURE_TOLERANCE and
        the Cholesky factor of the lattice covariance otherwise. Coarse
        lattice scales sigma_s * n below one go to Cholesky directly.
    """
    if spec.is_independent:
        return np.eye(n)
    if method == 'quadrature':
        return factor_matrix(n, spec, pad=quadrature_pad(n, spec))
    elif method == 'cholesky':
        return cholesky_factor(discrete_covariance(n, spec))
    elif method != 'auto':
        raise ConfigurationError("factor method '{}' not supported".format(
            method))

    sigma = discrete_covariance(n, spec)
    if spec.sigma_s * n >= MIN_QUADRATURE_SCALE:
        factor = factor_matrix(n, spec, pad=quadrature_pad(n, spec))
        residual = factor_residual(sigma, factor)
        if residual <= QUADRATURE_TOLERANCE:
            return factor
        logging.info('quadrature residual {:.3g} at lattice scale {:.3g}, '
                     'using Cholesky factor'.format(residual,
                                                    spec.sigma_s * n))
    else:
        factor = None
        logging.info(
            'lattice scale {:.3g} too small for quadrature, using '
            'Cholesky factor'.format(spec.sigma_s * n))
    try:
        return cholesky_factor(sigma)
    except DecompositionError:
        if factor is None:
            raise
        logging.warning('lattice covariance is numerically singular, '
                        'keeping the quadrature factor')
        return factor


def factor_residual(sigma, factor):
    """
    relative Frobenius residual ||sigma - A A^T|| / ||sigma||
    """
    return linalg.norm(sigma - factor.dot(factor.T)) / linalg.norm(sigma)
