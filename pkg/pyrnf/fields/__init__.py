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
Random neural fields on the 1-torus

The covariance of the initial weights is described by a
:class:`CovarianceSpec`, the receptive field of a neuron by a
:class:`ReceptiveFieldSpec`. A sampled layer is held by a
:class:`WeightBundle`.

Kernels and factor matrices live in :mod:`pyrnf.fields.kernels`,
masks and weight sampling in :mod:`pyrnf.fields.sampling`.
"""

import numpy as np

from pyrnf.exceptions import ConfigurationError

# closed forms of the Matern kernel are available for these smoothness values
MATERN_CLOSED_FORMS = (0.5, 1.5, 2.5)


class CovarianceSpec(object):

    """
    Stationary covariance of the initial weights along the presynaptic
    neuron index
    """
    families = ('gaussian', 'matern', 'independent')

    def __init__(self, family='gaussian', sigma_s=0.01, nu=None,
                 wrap_terms=3, numeric_bessel=False):
        """
        Args:

        * family (str):
            gaussian, matern or independent (identity covariance)

        Kwargs:

        * sigma_s (float):
            correlation scale in torus units

        * nu (float):
            Matern smoothness; only used for the matern family

        * wrap_terms (int):
            number of lattice translates on each side that are kept in
            the torus wrap sum (default: 3)

        * numeric_bessel (boolean):
            allow smoothness values without a closed form; these are
            evaluated with :func:`scipy.special.kv`
        """
        family = str(family).lower()
        if family not in self.families:
            raise ConfigurationError(
                "covariance family '{}' not supported".format(family))
        self.family = family
        self.sigma_s = float(sigma_s) if sigma_s is not None else None
        self.nu = float(nu) if nu is not None else None
        self.wrap_terms = int(wrap_terms)
        self.numeric_bessel = bool(numeric_bessel)
        self.validate()

    def validate(self):
        if self.family == 'independent':
            return
        if self.sigma_s is None or not self.sigma_s > 0:
            raise ConfigurationError(
                'sigma_s must be positive, got {}'.format(self.sigma_s))
        if self.wrap_terms < 0:
            raise ConfigurationError(
                'wrap_terms must be non-negative, got {}'.format(
                    self.wrap_terms))
        if self.family == 'matern':
            if self.nu is None or not self.nu > 0:
                raise ConfigurationError(
                    'nu must be positive for the matern family, got {}'.format(
                        self.nu))
            if self.nu not in MATERN_CLOSED_FORMS and \
                    not self.numeric_bessel:
                raise ConfigurationError(
                    'matern smoothness nu={} has no closed form; set '
                    'numeric_bessel to evaluate it numerically'.format(
                        self.nu))

    @property
    def is_independent(self):
        return self.family == 'independent'

    def to_dict(self):
        ret = {'family': self.family, 'sigma_s': self.sigma_s,
               'wrap_terms': self.wrap_terms}
        if self.family == 'matern':
            ret['nu'] = self.nu
            if self.numeric_bessel:
                ret['numeric_bessel'] = True
        return ret

    @classmethod
    def from_dict(cls, dictionary):
        return cls(family=dictionary.get('family', 'gaussian'),
                   sigma_s=dictionary.get('sigma_s', 0.01),
                   nu=dictionary.get('nu'),
                   wrap_terms=dictionary.get('wrap_terms', 3),
                   numeric_bessel=dictionary.get('numeric_bessel', False))

    def __eq__(self, other):
        return isinstance(other, CovarianceSpec) and \
            self.to_dict() == other.to_dict()

    def __repr__(self):
        if self.family == 'matern':
            return "<pyrnf 'CovarianceSpec' matern nu={} sigma_s={}>".format(
                self.nu, self.sigma_s)
        return "<pyrnf 'CovarianceSpec' {} sigma_s={}>".format(
            self.family, self.sigma_s)


class ReceptiveFieldSpec(object):

    """
    Fixed receptive field that masks the connections of a layer
    """
    families = ('none', 'gaussian_filter', 'mexican_hat')

    def __init__(self, family='none', sigma_r=None):
        """
        Args:

        * family (str):
            none (all-ones mask), gaussian_filter or mexican_hat

        Kwargs:

        * sigma_r (float):
            width of the receptive field
        """
        family = str(family).lower()
        if family not in self.families:
            raise ConfigurationError(
                "receptive field family '{}' not supported".format(family))
        self.family = family
        self.sigma_r = float(sigma_r) if sigma_r is not None else None
        if family != 'none' and (self.sigma_r is None or
                                 not self.sigma_r > 0):
            raise ConfigurationError(
                'sigma_r must be positive, got {}'.format(self.sigma_r))

    def to_dict(self):
        return {'family': self.family, 'sigma_r': self.sigma_r}

    @classmethod
    def from_dict(cls, dictionary):
        return cls(family=dictionary.get('family', 'none'),
                   sigma_r=dictionary.get('sigma_r'))

    def __eq__(self, other):
        return isinstance(other, ReceptiveFieldSpec) and \
            self.to_dict() == other.to_dict()

    def __repr__(self):
        return "<pyrnf 'ReceptiveFieldSpec' {} sigma_r={}>".format(
            self.family, self.sigma_r)


class WeightBundle(object):

    """
    The parameters of one masked dense layer

    ``W_tilde`` and ``beta`` are trainable, the mask ``R`` and the scales
    are fixed. The effective weights and biases are derived on access::

        W = sigma_w / sqrt(n_in) * R * W_tilde
        b = sigma_b * beta
    """

    def __init__(self, W_tilde, R, beta, sigma_w, sigma_b):
        self.W_tilde = np.asarray(W_tilde, dtype=np.float64)
        self.R = np.asarray(R, dtype=np.float64)
        self.beta = np.asarray(beta, dtype=np.float64)
        if self.W_tilde.shape != self.R.shape:
            raise ConfigurationError(
                'mask shape {} does not match weights {}'.format(
                    self.R.shape, self.W_tilde.shape))
        if self.beta.shape != (self.W_tilde.shape[1], ):
            raise ConfigurationError(
                'bias shape {} does not match {} output neurons'.format(
                    self.beta.shape, self.W_tilde.shape[1]))
        self.sigma_w = float(sigma_w)
        self.sigma_b = float(sigma_b)
        # an all-ones mask lets the tangent kernel use the unmasked shortcut
        self.unmasked = bool(np.all(self.R == 1.))

    @property
    def n_in(self):
        return self.W_tilde.shape[0]

    @property
    def n_out(self):
        return self.W_tilde.shape[1]

    @property
    def scale(self):
        """
        the NTK parameterization factor sigma_w / sqrt(n_in)
        """
        return self.sigma_w / np.sqrt(self.n_in)

    @property
    def W(self):
        return self.scale * self.R * self.W_tilde

    @property
    def b(self):
        return self.sigma_b * self.beta

    @property
    def n_params(self):
        return self.W_tilde.size + self.beta.size

    def copy(self):
        return WeightBundle(self.W_tilde.copy(), self.R, self.beta.copy(),
                            self.sigma_w, self.sigma_b)
