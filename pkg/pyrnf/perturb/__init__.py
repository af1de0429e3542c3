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
Input perturbations and the stability of the kernel representation

The stability of a network at a reference image x against a set S of
perturbed images is the average relative distance in the reproducing
kernel Hilbert space of its tangent kernel::

    1/|S| sum_{x' in S} ||Phi(x') - Phi(x)|| / ||Phi(x)||

with ||Phi(x') - Phi(x)||^2 = Theta(x, x) + Theta(x', x') - 2 Theta(x, x')
and vector output kernels reduced by the trace over the class blocks.
"""

import numpy as np

from pyrnf.exceptions import ConfigurationError

KINDS = ('noise', 'translate', 'elastic', 'translate_elastic')
MAX_SHIFT = 4
NOISE_LEVELS = (0., .1, .2, .3, .4, .5)


class PerturbationSpec(object):

    """
    A family of random perturbations

    Translations are drawn uniformly from {-max_shift..max_shift} in both
    directions, elastic magnitudes uniformly from alpha_range.
    """

    def __init__(self, kind='translate_elastic', sigma_noise=0.,
                 max_shift=2, alpha_range=(1., 3.), sigma_def=4., count=50,
                 seed=0):
        if kind not in KINDS:
            raise ConfigurationError(
                "perturbation kind '{}' not supported".format(kind))
        if sigma_noise < 0:
            raise ConfigurationError('sigma_noise must be non-negative')
        if not 0 <= max_shift <= MAX_SHIFT:
            raise ConfigurationError('max_shift must lie in 0..{}'.format(
                MAX_SHIFT))
        alpha_range = tuple(float(a) for a in alpha_range)
        if len(alpha_range) != 2 or not 0 <= alpha_range[0] <= \
                alpha_range[1]:
            raise ConfigurationError('invalid alpha range {}'.format(
                alpha_range))
        if sigma_def <= 0:
            raise ConfigurationError('sigma_def must be positive')
        if int(count) < 1:
            raise ConfigurationError('count must be positive')
        self.kind = kind
        self.sigma_noise = float(sigma_noise)
        self.max_shift = int(max_shift)
        self.alpha_range = alpha_range
        self.sigma_def = float(sigma_def)
        self.count = int(count)
        self.seed = seed

    def __repr__(self):
        return "<pyrnf 'PerturbationSpec' {} x{}>".format(self.kind,
                                                          self.count)

    @property
    def label(self):
        """
        a short description of the parameters for reports
        """
        if self.kind == 'noise':
            return 'sigma={:g}'.format(self.sigma_noise)
        parts = []
        if self.kind in ('translate', 'translate_elastic'):
            parts.append('shift<={}'.format(self.max_shift))
        if self.kind in ('elastic', 'translate_elastic'):
            parts.append('alpha={:g}-{:g},sigma_def={:g}'.format(
                self.alpha_range[0], self.alpha_range[1], self.sigma_def))
        return ';'.join(parts)

    def to_dict(self):
        return {'kind': self.kind, 'sigma_noise': self.sigma_noise,
                'max_shift': self.max_shift,
                'alpha_range': list(self.alpha_range),
                'sigma_def': self.sigma_def, 'count': self.count,
                'seed': self.seed}

    @classmethod
    def from_dict(cls, dictionary):
        return cls(**dictionary)


class StabilityReport(object):

    """
    Mean and standard deviation over trials of a per-model metric
    (relative distance or test loss)
    """
    columns = ('model', 'kind', 'level', 'metric', 'mean', 'std', 'trials',
               'acc_mean', 'acc_std')

    def __init__(self, metric='relative_distance'):
        self.metric = metric
        self.records = []
        self.clamped = 0

    def __len__(self):
        return len(self.records)

    def add(self, model, kind, level, values, accuracies=None):
        values = np.asarray(values, dtype=np.float64)
        record = {'model': model, 'kind': kind, 'level': level,
                  'metric': self.metric, 'values': values,
                  'mean': float(values.mean()), 'std': float(values.std()),
                  'trials': values.size, 'acc_mean': np.nan,
                  'acc_std': np.nan}
        if accuracies is not None:
            accuracies = np.asarray(accuracies, dtype=np.float64)
            record['acc_mean'] = float(accuracies.mean())
            record['acc_std'] = float(accuracies.std())
        self.records.append(record)
        return record

    def select(self, model=None, kind=None, level=None):
        return [record for record in self.records
                if (model is None or record['model'] == model) and
                (kind is None or record['kind'] == kind) and
                (level is None or record['level'] == level)]

    def mean(self, model, kind=None, level=None):
        records = self.select(model, kind, level)
        if len(records) != 1:
            raise KeyError('{} records for model {}'.format(len(records),
                                                             model))
        return records[0]['mean']

    def best_model(self, kind=None, level=None):
        """
        the model with the smallest mean
        """
        records = self.select(kind=kind, level=level)
        return min(records, key=lambda record: record['mean'])['model']

    def rows(self):
        for record in self.records:
            yield [record[name] for name in self.columns]
