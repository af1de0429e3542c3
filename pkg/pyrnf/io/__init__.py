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
MNIST in the IDX format and deterministic train/validation splits
"""

import gzip
import hashlib
import os
import struct

import numpy as np

from pyrnf import data_path
from pyrnf.exceptions import (BadMagicError, ConfigurationError,
                              CountMismatchError, LabelRangeError,
                              TruncatedFileError)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    'train': ('train-images-idx3-ubyte', 'train-labels-idx1-ubyte'),
    'test': ('t10k-images-idx3-ubyte', 't10k-labels-idx1-ubyte'),
}
# MD5 of the gzipped files as distributed
MNIST_MD5 = {
    'train-images-idx3-ubyte.gz': 'f68b3c2dcbeaaa9fbdd348bbdeb94873',
    'train-labels-idx1-ubyte.gz': 'd53e105ee54ea40749a09fcbcd1e9432',
    't10k-images-idx3-ubyte.gz': '9fb629c4189551a2d022fa330f9573f3',
    't10k-labels-idx1-ubyte.gz': 'ec29112dd5afa0611ce80d1b7f02629c',
}


class Dataset(object):

    """
    A set of flattened images with their class labels

    Pixels are scaled to [0, 1], labels are classes 1..10 (digit d is
    class d + 1).
    """

    def __init__(self, images, labels, split='all', checksum=None,
                 indices=None, shape=(28, 28)):
        """
        Args:

        * images (numpy.array):
            (N, pixels) values in [0, 1]

        * labels (numpy.array):
            N classes in 1..10

        Kwargs:

        * split (str):
            a tag like train, val or test

        * checksum (str):
            sha256 of the source files

        * indices (numpy.array):
            positions of the examples in the source dataset

        * shape (tuple):
            image height and width
        """
        self.images = np.asarray(images, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        if self.images.ndim != 2 or \
                self.images.shape[0] != self.labels.shape[0]:
            raise ConfigurationError(
                '{} images do not match {} labels'.format(
                    self.images.shape, self.labels.shape))
        if self.images.size and (self.images.min() < 0. or
                                 self.images.max() > 1.):
            raise ConfigurationError('pixel values must lie in [0, 1]')
        if self.labels.size and (self.labels.min() < 1 or
                                 self.labels.max() > 10):
            raise ConfigurationError('labels must lie in 1..10')
        self.split = split
        self.checksum = checksum
        self.indices = np.arange(len(self.labels)) if indices is None \
            else np.asarray(indices, dtype=np.int64)
        self.shape = tuple(shape)

    def __repr__(self):
        return "<pyrnf 'Dataset' {} ({} examples)>".format(
            self.split, len(self))

    def __str__(self):
        return u"""{} ({} examples of {}x{} pixels)
 digits: {}""".format(self.split, len(self), self.shape[0], self.shape[1],
                      ', '.join('{}: {}'.format(digit, count)
                                for digit, count in self.digit_counts()))

    def __len__(self):
        return self.labels.shape[0]

    @property
    def digits(self):
        return self.labels - 1

    def digit_counts(self):
        digits, counts = np.unique(self.digits, return_counts=True)
        return list(zip(digits.tolist(), counts.tolist()))

    def targets(self):
        """
        the encoded regression targets (N, 10)
        """
        from pyrnf.training.utils import encode_labels
        return encode_labels(self.labels)

    def select(self, positions, split=None):
        positions = np.asarray(positions, dtype=np.int64)
        return Dataset(self.images[positions], self.labels[positions],
                       split or self.split, self.checksum,
                       self.indices[positions], self.shape)

    def probe_positions(self):
        """
        position of the first example of every class present, ordered
        by class
        """
        classes, first = np.unique(self.labels, return_index=True)
        return first, classes


def _open(path, mode='rb'):
    if path.endswith('.gz'):
        return gzip.open(path, mode)
    return open(path, mode)


def _read_idx(path, magic):
    with _open(path) as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise TruncatedFileError('{} holds no IDX header'.format(path))
    found, = struct.unpack('>I', raw[:4])
    if found != magic:
        raise BadMagicError('{}: magic number 0x{:08x}, expected '
                            '0x{:08x}'.format(path, found, magic))
    ndim = magic & 0xff
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedFileError('{}: header truncated'.format(path))
    dims = struct.unpack('>' + 'I' * ndim, raw[4:header])
    size = int(np.prod(dims))
    if len(raw) < header + size:
        raise TruncatedFileError('{}: expected {} data bytes, found '
                                 '{}'.format(path, size, len(raw) - header))
    data = np.frombuffer(raw, dtype=np.uint8, count=size, offset=header)
    return data.reshape(dims), hashlib.sha256(raw).hexdigest()


def load_mnist_idx(images_path, labels_path, split='all'):
    """
    read an MNIST image and label file pair (optionally gzipped)

    Args:

    * images_path (str):
        IDX file with magic 0x00000803

    * labels_path (str):
        IDX file with magic 0x00000801

    Returns:

        :class:`Dataset`
    """
    images, images_sum = _read_idx(images_path, IMAGES_MAGIC)
    labels, labels_sum = _read_idx(labels_path, LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError('{} images but {} labels'.format(
            images.shape[0], labels.shape[0]))
    if labels.size and labels.max() > 9:
        raise LabelRangeError('{}: label {} out of range 0..9'.format(
            labels_path, labels.max()))
    checksum = hashlib.sha256(
        (images_sum + labels_sum).encode('ascii')).hexdigest()
    return Dataset(images.reshape(images.shape[0], -1) / 255.,
                   labels.astype(np.int64) + 1, split, checksum,
                   shape=images.shape[1:])


def _locate(directory, name):
    for candidate in (name, name + '.gz'):
        path = os.path.join(directory, candidate)
        if os.path.exists(path):
            return path
    raise IOError('MNIST file {} not found in {} (set RNF_DATA_DIR or run '
                  'the fetch command)'.format(name, directory))


def load_mnist(split='train', directory=None):
    """
    load the MNIST train or test split from the data directory
    """
    if split not in MNIST_FILES:
        raise ConfigurationError("MNIST split '{}' unknown".format(split))
    directory = directory or data_path()
    images, labels = MNIST_FILES[split]
    return load_mnist_idx(_locate(directory, images),
                          _locate(directory, labels), split)


def write_idx(path, array):
    """
    write an unsigned byte array in the IDX format (gzipped for .gz)
    """
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise ConfigurationError('IDX files hold unsigned bytes only')
    magic = 0x00000800 | array.ndim
    header = struct.pack('>I' + 'I' * array.ndim, magic, *array.shape)
    with _open(path, 'wb') as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(array).tobytes())


def subsample(ds, n_train, n_val, seed=0):
    """
    disjoint random training and validation subsets

    The permutation is a Fisher-Yates shuffle driven by the PCG64 stream
    derived from (seed, 'subsample').

    Returns:

        (train, val) :class:`Dataset` instances; their ``indices`` hold the
        chosen positions in the source
    """
    from pyrnf.fields.sampling import derive_rng
    if n_train < 0 or n_val < 0:
        raise ConfigurationError('subset sizes must be non-negative')
    if n_train + n_val > len(ds):
        raise ConfigurationError(
            'cannot draw {} + {} examples from {}'.format(n_train, n_val,
                                                         len(ds)))
    order = derive_rng(seed, 'subsample').permutation(len(ds))
    return (ds.select(order[:n_train], 'train'),
            ds.select(order[n_train:n_train + n_val], 'val'))
