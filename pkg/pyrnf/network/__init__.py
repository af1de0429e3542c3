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
Discretized multilayer random neural fields

A :class:`NetworkModel` is an ordered list of :class:`LayerSpec`
instances, masked dense or max-pooling layers, together with the
sampled :class:`pyrnf.fields.WeightBundle` of every dense layer. The last
layer is always a linear readout (the head) with one output per class.

:func:`build_model` builds the five model architectures compared in the
experiments:

=====  ==========================================================
Model  layers
=====  ==========================================================
1      (Gaussian filter) FC (Gaussian kernel) -> FC -> FC
2      (Gaussian filter) FC (Gaussian kernel) -> MaxPool -> FC
3      (Mexican hat) FC (Gaussian kernel) -> FC -> FC
4      (Gaussian filter) FC (Matern kernel, nu=0.5) -> FC -> FC
5      FC -> FC -> FC
=====  ==========================================================

Only the first layer is a neural field; all further layers are
unmasked and their weights independent.
"""

import copy
import hashlib

import numpy as np

from pyrnf import config
from pyrnf.exceptions import ConfigurationError
from pyrnf.fields import CovarianceSpec, ReceptiveFieldSpec
from pyrnf.fields.sampling import derive_rng, sample_correlated_weights

MODEL_IDS = (1, 2, 3, 4, 5)
INPUT_WIDTH = 784
N_CLASSES = 10
DEFAULT_WIDTH = 2048


class LayerSpec(object):

    """
    Description of a single layer
    """
    kinds = ('masked_dense', 'max_pool')
    activations = ('relu', 'identity')

    def __init__(self, kind, n_in, n_out=None, rf=None, cov=None,
                 activation='relu', pool_window=2, pool_stride=2):
        """
        Args:

        * kind (str):
            masked_dense or max_pool

        * n_in (int):
            input width

        Kwargs:

        * n_out (int):
            output width; derived from the pooling geometry for max_pool

        * rf (:class:`pyrnf.fields.ReceptiveFieldSpec`):
            receptive field (default: none)

        * cov (:class:`pyrnf.fields.CovarianceSpec`):
            covariance of the initial weights (default: independent)

        * activation (str):
            relu or identity

        * pool_window, pool_stride (int):
            pooling geometry over the neuron index
        """
        if kind not in self.kinds:
            raise ConfigurationError("layer kind '{}' not supported".format(
                kind))
        if activation not in self.activations:
            raise ConfigurationError(
                "activation '{}' not supported".format(activation))
        self.kind = kind
        self.n_in = int(n_in)
        self.activation = activation
        self.rf = rf or ReceptiveFieldSpec('none')
        self.cov = cov or CovarianceSpec('independent')
        self.pool_window = int(pool_window)
        self.pool_stride = int(pool_stride)
        if kind == 'max_pool':
            if not 1 <= self.pool_window <= self.n_in or self.pool_stride < 1:
                raise ConfigurationError(
                    'invalid pooling geometry window={} stride={} for '
                    'width {}'.format(self.pool_window, self.pool_stride,
                                      self.n_in))
            pooled = (self.n_in - self.pool_window) // self.pool_stride + 1
            if n_out is not None and int(n_out) != pooled:
                raise ConfigurationError(
                    'max_pool output width must be {}, got {}'.format(
                        pooled, n_out))
            self.n_out = pooled
        else:
            if n_out is None or int(n_out) < 1:
                raise ConfigurationError(
                    'masked_dense layers need a positive output width')
            self.n_out = int(n_out)

    @property
    def is_dense(self):
        return self.kind == 'masked_dense'

    def to_dict(self):
        ret = {'kind': self.kind, 'n_in': self.n_in, 'n_out': self.n_out,
               'activation': self.activation}
        if self.is_dense:
            ret['rf'] = self.rf.to_dict()
            ret['cov'] = self.cov.to_dict()
        else:
            ret['pool_window'] = self.pool_window
            ret['pool_stride'] = self.pool_stride
        return ret

    @classmethod
    def from_dict(cls, dictionary):
        d = dict(dictionary)
        if 'rf' in d:
            d['rf'] = ReceptiveFieldSpec.from_dict(d['rf'])
        if 'cov' in d:
            d['cov'] = CovarianceSpec.from_dict(d['cov'])
        return cls(**d)

    def __repr__(self):
        return "<pyrnf 'LayerSpec' {} {} -> {}>".format(
            self.kind, self.n_in, self.n_out)


class ForwardTrace(object):

    """
    Everything the backward pass needs from a forward pass

    * inputs: input of every layer (x^{l-1})

    * pre: pre-activations h^l of dense layers (None for pooling)

    * argmax: pooling indices (None for dense layers)

    * outputs: network outputs f of shape (N, C)
    """

    def __init__(self, inputs, pre, post, argmax, version):
        self.inputs = inputs
        self.pre = pre
        self.post = post
        self.argmax = argmax
        self.version = version

    @property
    def outputs(self):
        return self.post[-1]

    @property
    def n_examples(self):
        return self.outputs.shape[0]


class NetworkModel(object):

    """
    A discretized random neural field network
    """

    def __init__(self, layers, params, seed=0, settings=None):
        """
        Args:

        * layers (list of :class:`LayerSpec`):
            the architecture; the last layer is the readout

        * params (list):
            a :class:`pyrnf.fields.WeightBundle` for every dense layer and
            None for every pooling layer

        Kwargs:

        * seed (int):
            root seed the parameters were sampled with

        * settings (dict):
            the arguments the model was built with (model_id, widths,
            sigma parameters); stored in checkpoints and manifests
        """
        if len(layers) != len(params) or not layers:
            raise ConfigurationError('need one parameter entry per layer')
        for spec, bundle in zip(layers, params):
            if spec.is_dense:
                if bundle is None or bundle.W_tilde.shape != (
                        spec.n_in, spec.n_out):
                    raise ConfigurationError(
                        'parameters do not match {}'.format(spec))
            elif bundle is not None:
                raise ConfigurationError('pooling layers have no parameters')
        for first, second in zip(layers[:-1], layers[1:]):
            if first.n_out != second.n_in:
                raise ConfigurationError(
                    'width mismatch between {} and {}'.format(first, second))
        if not layers[-1].is_dense:
            raise ConfigurationError('the last layer must be dense')
        self.layers = list(layers)
        self.params = list(params)
        self.seed = seed
        self.settings = settings or {}
        self.version = 0

    def __repr__(self):
        return "<pyrnf 'NetworkModel' {} ({} parameters)>".format(
            ' -> '.join(str(spec.n_in) for spec in self.layers) +
            ' -> {}'.format(self.n_classes), self.n_params)

    @property
    def input_width(self):
        return self.layers[0].n_in

    @property
    def n_classes(self):
        return self.layers[-1].n_out

    @property
    def head(self):
        return self.params[-1]

    @property
    def n_params(self):
        return sum(spec.n_in * spec.n_out + spec.n_out
                   for spec in self.layers if spec.is_dense)

    def dense_layers(self):
        """
        iterate over (index, LayerSpec, WeightBundle) of the dense layers
        """
        for index, (spec, bundle) in enumerate(zip(self.layers,
                                                   self.params)):
            if spec.is_dense:
                yield index, spec, bundle

    def copy(self):
        ret = NetworkModel(self.layers, [
            None if bundle is None else bundle.copy()
            for bundle in self.params], self.seed,
            copy.deepcopy(self.settings))
        return ret

    def apply_update(self, grads, eta):
        """
        one gradient step theta <- theta - eta * grad on W_tilde and beta

        Args:

        * grads (list):
            (dW_tilde, dbeta) per layer as returned by
            :func:`pyrnf.network.methods.backward`, None for pooling

        * eta (float):
            learning rate
        """
        for bundle, grad in zip(self.params, grads):
            if bundle is None:
                continue
            bundle.W_tilde -= eta * grad[0]
            bundle.beta -= eta * grad[1]
        self.version += 1

    def parameter_vector(self):
        """
        all trainable parameters as one flat vector (W_tilde then beta,
        layer by layer)
        """
        return np.concatenate([
            np.concatenate((bundle.W_tilde.ravel(), bundle.beta))
            for _, _, bundle in self.dense_layers()])

    def set_parameter_vector(self, vector):
        vector = np.asarray(vector, dtype=np.float64)
        if vector.size != self.n_params:
            raise ConfigurationError('expected {} parameters, got {}'.format(
                self.n_params, vector.size))
        offset = 0
        for _, spec, bundle in self.dense_layers():
            size = spec.n_in * spec.n_out
            bundle.W_tilde = vector[offset:offset + size].reshape(
                spec.n_in, spec.n_out).copy()
            offset += size
            bundle.beta = vector[offset:offset + spec.n_out].copy()
            offset += spec.n_out
        self.version += 1

    def params_hash(self):
        """
        sha256 hex digest of the trainable parameters
        """
        return hashlib.sha256(self.parameter_vector().tobytes()).hexdigest()

    def forward(self, X):
        from pyrnf.network.methods import forward
        return forward(self, X)

    def predict(self, X):
        return self.forward(X).outputs


def build_network(layers, seed=0, sigma_w=None, sigma_b=None,
                  factor_method='auto', settings=None):
    """
    sample the parameters of a given architecture

    The dense layer at position l draws from the generator derived from
    (seed, 'layer', l).

    Args:

    * layers (list of :class:`LayerSpec`):
        the architecture

    Kwargs:

    * seed (int):
        root seed

    * sigma_w, sigma_b (float):
        scales of the NTK parameterization (default: pyrnf.config)

    Returns:

        :class:`NetworkModel`
    """
    if sigma_w is None:
        sigma_w = config['sigma_w']
    if sigma_b is None:
        sigma_b = config['sigma_b']
    params = []
    for index, spec in enumerate(layers):
        if spec.is_dense:
            params.append(sample_correlated_weights(
                spec.n_in, spec.n_out, spec.cov, spec.rf, sigma_w,
                derive_rng(seed, 'layer', index), sigma_b=sigma_b,
                factor_method=factor_method))
        else:
            params.append(None)
    return NetworkModel(layers, params, seed, settings)


def _hidden_widths(widths):
    if widths is None:
        widths = DEFAULT_WIDTH
    if np.isscalar(widths):
        return (int(widths), ) * 3
    widths = tuple(int(w) for w in widths)
    if len(widths) != 3:
        raise ConfigurationError('need three hidden widths, got {}'.format(
            widths))
    return widths


def model_layers(model_id, widths=None, sigma_r=0.5, sigma_s=0.01, nu=0.5,
                 wrap_terms=3, input_width=INPUT_WIDTH, n_classes=N_CLASSES,
                 pool_window=2, pool_stride=2):
    """
    the layer specifications of one of the five models

    Model 2 pools the first hidden layer and ignores the second width.
    """
    if model_id not in MODEL_IDS:
        raise ConfigurationError('model_id must be one of {}, got {}'.format(
            MODEL_IDS, model_id))
    w1, w2, w3 = _hidden_widths(widths)
    if model_id == 3:
        first_rf = ReceptiveFieldSpec('mexican_hat', sigma_r)
    elif model_id == 5:
        first_rf = ReceptiveFieldSpec('none')
    else:
        first_rf = ReceptiveFieldSpec('gaussian_filter', sigma_r)
    if model_id == 4:
        first_cov = CovarianceSpec('matern', sigma_s, nu=nu,
                                   wrap_terms=wrap_terms)
    elif model_id == 5:
        first_cov = CovarianceSpec('independent')
    else:
        first_cov = CovarianceSpec('gaussian', sigma_s,
                                   wrap_terms=wrap_terms)

    layers = [LayerSpec('masked_dense', input_width, w1, first_rf, first_cov)]
    if model_id == 2:
        pool = LayerSpec('max_pool', w1, pool_window=pool_window,
                         pool_stride=pool_stride)
        layers += [pool, LayerSpec('masked_dense', pool.n_out, w3)]
    else:
        layers += [LayerSpec('masked_dense', w1, w2),
                   LayerSpec('masked_dense', w2, w3)]
    layers.append(LayerSpec('masked_dense', w3, n_classes,
                            activation='identity'))
    return layers


def build_model(model_id, widths=None, sigma_r=0.5, sigma_s=0.01, nu=0.5,
                sigma_w=None, sigma_b=None, seed=0, wrap_terms=3,
                input_width=INPUT_WIDTH, n_classes=N_CLASSES, pool_window=2,
                pool_stride=2, factor_method='auto'):
    """
    build and sample one of the five models

    Args:

    * model_id (int):
        1..5, see the module documentation

    Kwargs:

    * widths (int or 3-tuple of int):
        hidden widths (default: 2048)

    * sigma_r (float):
        receptive field width of the first layer

    * sigma_s (float):
        correlation scale of the first layer

    * nu (float):
        Matern smoothness (model 4 only)

    * sigma_w, sigma_b (float):
        NTK parameterization scales (default: pyrnf.config)

    * seed (int):
        root seed

    Returns:

        :class:`NetworkModel`
    """
    if sigma_w is None:
        sigma_w = config['sigma_w']
    if sigma_b is None:
        sigma_b = config['sigma_b']
    layers = model_layers(model_id, widths, sigma_r, sigma_s, nu, wrap_terms,
                          input_width, n_classes, pool_window, pool_stride)
    settings = {
        'model_id': model_id, 'widths': list(_hidden_widths(widths)),
        'sigma_r': sigma_r, 'sigma_s': sigma_s, 'nu': nu,
        'sigma_w': sigma_w, 'sigma_b': sigma_b, 'wrap_terms': wrap_terms,
        'input_width': input_width, 'n_classes': n_classes,
        'pool_window': pool_window, 'pool_stride': pool_stride,
        'factor_method': factor_method, 'seed': seed,
    }
    return build_network(layers, seed, sigma_w, sigma_b, factor_method,
                         settings)


def build_linear_model(input_width=INPUT_WIDTH, n_classes=N_CLASSES, seed=0,
                       sigma_w=None, sigma_b=None):
    """
    a readout-only network; its outputs are linear in the parameters
    """
    layers = [LayerSpec('masked_dense', input_width, n_classes,
                        activation='identity')]
    return build_network(layers, seed, sigma_w, sigma_b,
                         settings={'model_id': 0, 'input_width': input_width,
                                   'n_classes': n_classes, 'seed': seed})
