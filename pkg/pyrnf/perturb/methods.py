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
Perturbation generators and the relative distance stability metric

Images are flattened square grids (28 x 28 for MNIST) with pixel values
in [0, 1]; every generator returns a new flattened image.
"""

import logging

import numpy as np
from scipy import ndimage

from pyrnf.exceptions import (ConfigurationError, NegativeRadicandError,
                              NumericalError)
from pyrnf.fields.sampling import derive_rng, derive_seed
from pyrnf.perturb import MAX_SHIFT, StabilityReport

RADICAND_TOLERANCE = 1e-8


def _as_grid(image):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    side = int(round(np.sqrt(image.size)))
    if side * side != image.size:
        raise ConfigurationError('image of {} pixels is not square'.format(
            image.size))
    return image.reshape(side, side)


def apply_noise(image, sigma_noise, rng):
    """
    add i.i.d. Gaussian noise and clip to [0, 1]
    """
    image = np.asarray(image, dtype=np.float64)
    if sigma_noise < 0:
        raise ConfigurationError('sigma_noise must be non-negative')
    if sigma_noise == 0:
        return image.copy()
    noisy = image + sigma_noise * rng.standard_normal(image.shape)
    return np.clip(noisy, 0., 1.)


def translate(image, dx, dy):
    """
    shift an image by whole pixels, dx to the right and dy downwards,
    filling the border with zeros
    """
    if abs(dx) > MAX_SHIFT or abs(dy) > MAX_SHIFT:
        raise ConfigurationError('shifts are limited to {} pixels'.format(
            MAX_SHIFT))
    image = np.asarray(image, dtype=np.float64)
    grid = _as_grid(image)
    shifted = ndimage.shift(grid, (int(dy), int(dx)), order=0,
                            mode='constant', cval=0.)
    return shifted.reshape(image.shape)


def elastic_deform(image, alpha, sigma_def, rng):
    """
    elastic deformation

    A displacement field with N(0, 1) entries per pixel and direction is
    smoothed with a Gaussian filter of width sigma_def, scaled by alpha and
    used to resample the image bilinearly.

    Args:

    * image (numpy.array):
        flattened square image

    * alpha (float):
        displacement magnitude, 0 returns the image unchanged

    * sigma_def (float):
        smoothing width in pixels

    * rng (:class:`numpy.random.Generator`):
        source of the displacement field
    """
    if alpha < 0 or sigma_def <= 0:
        raise ConfigurationError('need alpha >= 0 and sigma_def > 0')
    image = np.asarray(image, dtype=np.float64)
    if alpha == 0:
        return image.copy()
    grid = _as_grid(image)
    shape = grid.shape
    dx = ndimage.gaussian_filter(rng.standard_normal(shape), sigma_def,
                                 mode='constant', cval=0.) * alpha
    dy = ndimage.gaussian_filter(rng.standard_normal(shape), sigma_def,
                                 mode='constant', cval=0.) * alpha
    rows, cols = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]),
                             indexing='ij')
    deformed = ndimage.map_coordinates(grid, [rows + dy, cols + dx], order=1,
                                       mode='constant', cval=0.)
    return deformed.reshape(image.shape)


def translate_then_elastic(image, dx, dy, alpha, sigma_def, rng):
    return elastic_deform(translate(image, dx, dy), alpha, sigma_def, rng)


def perturb(image, spec, rng):
    """
    one random perturbation of an image drawn from a
    :class:`pyrnf.perturb.PerturbationSpec`
    """
    if spec.kind == 'noise':
        return apply_noise(image, spec.sigma_noise, rng)
    if spec.kind in ('translate', 'translate_elastic'):
        dx, dy = rng.integers(-spec.max_shift, spec.max_shift + 1, size=2)
        image = translate(image, dx, dy)
    if spec.kind in ('elastic', 'translate_elastic'):
        alpha = rng.uniform(*spec.alpha_range)
        image = elastic_deform(image, alpha, spec.sigma_def, rng)
    return image


def perturbed_set(image, spec, rng):
    """
    spec.count perturbations of an image as a (count, pixels) array
    """
    return np.array([perturb(image, spec, rng) for _ in range(spec.count)])


def average_relative_distance(kernel_fn, x, S, full_output=False):
    """
    average relative kernel distance of the images S from the reference x

    Args:

    * kernel_fn (callable):
        (X_rows, X_cols=None) -> :class:`pyrnf.tangent.TangentKernel`,
        e.g. from :func:`pyrnf.tangent.methods.kernel_evaluator`

    * x (numpy.array):
        the reference image

    * S (numpy.array):
        (|S|, pixels) perturbed images

    Kwargs:

    * full_output (bool):
        also return the number of radicands clamped to zero

    Returns:

        float, or (distance, clamped) with full_output
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    if S.shape[0] == 0:
        raise ConfigurationError('the perturbed set is empty')
    kernel = kernel_fn(np.vstack((x, S))).class_trace()
    k_ref = kernel[0, 0]
    if not k_ref > 0:
        raise NumericalError('reference kernel value {:g} is not '
                             'positive'.format(k_ref))
    radicands = k_ref + np.diag(kernel)[1:] - 2. * kernel[0, 1:]
    radicands[np.all(S == x, axis=1)] = 0.
    negative = radicands < 0.
    if np.any(radicands < -RADICAND_TOLERANCE * k_ref):
        raise NegativeRadicandError(
            'radicand {:g} below tolerance for reference value {:g}'.format(
                radicands.min(), k_ref))
    clamped = int(negative.sum())
    if clamped:
        logging.warning('clamped {} negative radicands to zero'.format(
            clamped))
        radicands[negative] = 0.
    distance = float(np.mean(np.sqrt(radicands) / np.sqrt(k_ref)))
    if full_output:
        return distance, clamped
    return distance


def deformation_stability(builders, references, spec, trials=5, seed=0,
                          mode='trace', jobs=1):
    """
    mean relative distance of every model over several trials

    Every trial samples fresh networks from the trial seed; the
    perturbed sets depend on spec.seed, the trial and the reference only,
    so all models see the same perturbations.

    Args:

    * builders (dict):
        model name -> callable(seed) returning a
        :class:`pyrnf.network.NetworkModel`

    * references (numpy.array):
        (R, pixels) reference images

    * spec (:class:`pyrnf.perturb.PerturbationSpec`):
        the perturbation family

    Kwargs:

    * trials (int):
        number of trials

    * seed (int):
        root seed of the networks

    * mode (str):
        kernel mode used for the distances

    Returns:

        :class:`pyrnf.perturb.StabilityReport`
    """
    from pyrnf.tangent.methods import kernel_evaluator

    references = np.atleast_2d(references)
    sets = [[perturbed_set(ref, spec,
                           derive_rng(spec.seed, 'trial', trial, 'ref', r))
             for r, ref in enumerate(references)]
            for trial in range(trials)]
    report = StabilityReport('relative_distance')
    for name, build in builders.items():
        values = []
        for trial in range(trials):
            net = build(derive_seed(seed, 'trial', trial))
            kernel_fn = kernel_evaluator(net, mode=mode, jobs=jobs)
            distances = []
            for ref, S in zip(references, sets[trial]):
                distance, clamped = average_relative_distance(
                    kernel_fn, ref, S, full_output=True)
                report.clamped += clamped
                distances.append(distance)
            values.append(np.mean(distances))
            logging.info('model {} trial {}: mean relative distance '
                         '{:g}'.format(name, trial, values[-1]))
        report.add(name, spec.kind, spec.label, values)
    return report


def noise_robustness_curve(builders, levels, X_train, Y_train, X_test,
                           Y_test, trials=5, seed=0, mode='full', jobs=1):
    """
    test loss of tangent kernel regression on noisy test inputs

    The regression uses clean training data. Within a trial all noise
    levels scale the same noise draw.

    Args:

    * builders (dict):
        model name -> callable(seed) returning a network

    * levels (list of float):
        noise standard deviations

    * X_train, Y_train, X_test, Y_test (numpy.array):
        clean data and encoded targets

    Kwargs:

    * trials, seed, mode, jobs:
        see :func:`deformation_stability`

    Returns:

        :class:`pyrnf.perturb.StabilityReport` with one record per model
        and level
    """
    from pyrnf.tangent.methods import empirical_ntk, ntk_regression
    from pyrnf.training.utils import accuracy, mse_loss

    report = StabilityReport('test_loss')
    for name, build in builders.items():
        losses = np.zeros((len(levels), trials))
        accuracies = np.zeros((len(levels), trials))
        for trial in range(trials):
            net = build(derive_seed(seed, 'trial', trial))
            theta_train = empirical_ntk(net, X_train, mode=mode, jobs=jobs)
            for i, level in enumerate(levels):
                rng = derive_rng(seed, 'noise', trial)
                X_noisy = apply_noise(X_test, level, rng)
                theta_test = empirical_ntk(net, X_noisy, X_train, mode=mode,
                                           jobs=jobs)
                f = ntk_regression(theta_test, theta_train, Y_train)
                losses[i, trial] = mse_loss(f, Y_test, per='entry')
                accuracies[i, trial] = accuracy(f, Y_test)
        for i, level in enumerate(levels):
            report.add(name, 'noise', level, losses[i], accuracies[i])
            logging.info('model {} noise {:g}: test loss {:g}'.format(
                name, level, losses[i].mean()))
    return report
