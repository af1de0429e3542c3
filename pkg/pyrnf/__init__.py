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
pyRNF
=====

A package for supervised learning of multilayer random neural fields
in the neural tangent kernel regime
"""

import os

# pyRNF version
__version__ = '0.3.0'

# restrict imports when using "from pyrnf import *"
__all__ = ['config', 'tmp_path', 'data_path']

_writeable_dir = os.path.join(os.path.expanduser('~'), '.local', 'share')
_data_dir = os.environ.get(
    'RNF_DATA_DIR',
    os.path.join(os.environ.get("XDG_DATA_HOME", _writeable_dir), 'pyRNF'))
_tmp_dir = os.path.join(os.environ.get("TMPDIR", '/tmp'), 'pyRNF')
config = {
    'data_dir': _data_dir,
    'tmp_dir': _tmp_dir,
    'max_kernel_entries': 150000000,
    'sigma_w': 1.0,
    'sigma_b': 0.1,
    'ridge_start': 1e-8,
    'ridge_max': 1e-4,
}
"""
The config dictionary stores global configuration values for pyrnf.

In the first instance, the config is defined in ``pyrnf/__init__.py``. It
is possible to provide site wide customisations by including a
``siteconfig.py`` file along with the pyRNF source code. ``siteconfig.py``
should contain a function called ``update_config`` which takes the config
dictionary instance as its first and only argument (from where it is
possible to update the dictionary howsoever desired).

Keys in the config dictionary:

 * ``data_dir`` - the absolute path to the directory holding the MNIST
                  IDX files (``RNF_DATA_DIR`` takes precedence)

 * ``tmp_dir`` - the absolute path to a directory where temporary data
                 will be stored

 * ``max_kernel_entries`` - upper limit for the number of entries of a
                            tangent kernel matrix

 * ``sigma_w``, ``sigma_b`` - default weight and bias scales of the NTK
                              parameterization

 * ``ridge_start``, ``ridge_max`` - relative ridge range used when
                                    inverting tangent kernels
"""
del _data_dir
del _writeable_dir
del _tmp_dir

# try to import the siteconfig file
try:
    from pyrnf.siteconfig import update_config as _update_config
    _update_config(config)
except ImportError:
    pass


def tmp_path(*path_to_join):
    return os.path.join(config['tmp_dir'], *path_to_join)


def data_path(*path_to_join):
    return os.path.join(config['data_dir'], *path_to_join)
