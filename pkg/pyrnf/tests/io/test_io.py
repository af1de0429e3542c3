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

import os
import shutil
import struct
import tempfile

import numpy as np
from numpy.testing import assert_array_equal

from pyrnf.exceptions import (BadMagicError, ConfigurationError,
                              CountMismatchError, LabelRangeError,
                              TruncatedFileError)
from pyrnf.io import Dataset, load_mnist, load_mnist_idx, subsample, \
    write_idx


def _synthetic(directory, n=20, suffix='', labels=None):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, (n, 28, 28), dtype=np.uint8)
    if labels is None:
        labels = (np.arange(n) % 10).astype(np.uint8)
    images_path = os.path.join(directory, 'images' + suffix)
    labels_path = os.path.join(directory, 'labels' + suffix)
    write_idx(images_path, images)
    write_idx(labels_path, labels)
    return images, labels, images_path, labels_path


def test_idx_files():
    directory = tempfile.mkdtemp()
    try:
        for suffix in ('', '.gz'):
            images, labels, images_path, labels_path = _synthetic(
                directory, suffix=suffix)
            ds = load_mnist_idx(images_path, labels_path, 'train')
            assert len(ds) == 20
            assert ds.shape == (28, 28)
            assert ds.images.shape == (20, 784)
            assert_array_equal(ds.images, images.reshape(20, -1) / 255.)
            assert_array_equal(ds.labels, labels + 1)
            assert_array_equal(ds.digits, labels)
            assert ds.checksum is not None
    finally:
        shutil.rmtree(directory)


def test_checksum_is_stable():
    directory = tempfile.mkdtemp()
    try:
        _, _, images_path, labels_path = _synthetic(directory)
        first = load_mnist_idx(images_path, labels_path).checksum
        assert load_mnist_idx(images_path, labels_path).checksum == first
    finally:
        shutil.rmtree(directory)


def test_malformed_files():
    directory = tempfile.mkdtemp()
    try:
        _, _, images_path, labels_path = _synthetic(directory)
        empty = os.path.join(directory, 'empty')
        open(empty, 'wb').close()
        try:
            load_mnist_idx(empty, labels_path)
        except TruncatedFileError:
            pass
        else:
            assert False

        # swapped files carry the wrong magic numbers
        try:
            load_mnist_idx(labels_path, images_path)
        except BadMagicError:
            pass
        else:
            assert False

        short = os.path.join(directory, 'short')
        with open(images_path, 'rb') as fh:
            raw = fh.read()
        with open(short, 'wb') as fh:
            fh.write(raw[:-10])
        try:
            load_mnist_idx(short, labels_path)
        except TruncatedFileError:
            pass
        else:
            assert False

        header = os.path.join(directory, 'header')
        with open(header, 'wb') as fh:
            fh.write(struct.pack('>II', 0x803, 5))
        try:
            load_mnist_idx(header, labels_path)
        except TruncatedFileError:
            pass
        else:
            assert False
    finally:
        shutil.rmtree(directory)


def test_count_mismatch():
    directory = tempfile.mkdtemp()
    try:
        _, _, images_path, _ = _synthetic(directory)
        labels_path = os.path.join(directory, 'more-labels')
        write_idx(labels_path, np.zeros(21, dtype=np.uint8))
        try:
            load_mnist_idx(images_path, labels_path)
        except CountMismatchError:
            pass
        else:
            assert False
    finally:
        shutil.rmtree(directory)


def test_label_out_of_range():
    directory = tempfile.mkdtemp()
    try:
        _, _, images_path, _ = _synthetic(directory)
        labels_path = os.path.join(directory, 'bad-labels')
        labels = np.zeros(20, dtype=np.uint8)
        labels[7] = 10
        write_idx(labels_path, labels)
        try:
            load_mnist_idx(images_path, labels_path)
        except LabelRangeError as err:
            assert not isinstance(err, CountMismatchError)
            assert err.exit_code == 4
        else:
            assert False
    finally:
        shutil.rmtree(directory)


def test_mnist_directory():
    directory = tempfile.mkdtemp()
    try:
        rng = np.random.default_rng(1)
        write_idx(os.path.join(directory, 't10k-images-idx3-ubyte.gz'),
                  rng.integers(0, 256, (5, 28, 28), dtype=np.uint8))
        write_idx(os.path.join(directory, 't10k-labels-idx1-ubyte'),
                  np.arange(5, dtype=np.uint8))
        ds = load_mnist('test', directory)
        assert ds.split == 'test'
        assert len(ds) == 5
        try:
            load_mnist('train', directory)
        except IOError:
            pass
        else:
            assert False
        try:
            load_mnist('validation', directory)
        except ConfigurationError:
            pass
        else:
            assert False
    finally:
        shutil.rmtree(directory)


def test_dataset():
    labels = np.array([3, 1, 3, 2, 1])
    ds = Dataset(np.zeros((5, 4)), labels, shape=(2, 2))
    positions, classes = ds.probe_positions()
    assert_array_equal(positions, [1, 3, 0])
    assert_array_equal(classes, [1, 2, 3])
    assert ds.digit_counts() == [(0, 2), (1, 1), (2, 2)]
    assert ds.targets().shape == (5, 10)
    subset = ds.select([4, 0], 'val')
    assert_array_equal(subset.labels, [1, 3])
    assert_array_equal(subset.indices, [4, 0])
    assert subset.split == 'val'
    for images, labels in ((np.full((1, 4), 2.), [1]),
                           (np.zeros((1, 4)), [11]),
                           (np.zeros((2, 4)), [1])):
        try:
            Dataset(images, labels)
        except ConfigurationError:
            pass
        else:
            assert False


def test_subsample():
    ds = Dataset(np.zeros((30, 4)), np.arange(30) % 10 + 1, shape=(2, 2))
    train, val = subsample(ds, 20, 5, seed=3)
    assert len(train) == 20 and len(val) == 5
    assert not set(train.indices) & set(val.indices)
    again, _ = subsample(ds, 20, 5, seed=3)
    assert_array_equal(again.indices, train.indices)
    other, _ = subsample(ds, 20, 5, seed=4)
    assert not np.array_equal(other.indices, train.indices)
    try:
        subsample(ds, 26, 5)
    except ConfigurationError:
        pass
    else:
        assert False
