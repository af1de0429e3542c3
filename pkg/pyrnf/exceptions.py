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
Exceptions raised by pyRNF

The command line front-end maps them to exit codes: configuration and
shape problems exit with 2, numerical failures with 3 and data or file
problems with 4.
"""


class RNFError(Exception):

    """
    Base class of all pyRNF errors
    """
    exit_code = 1


class ConfigurationError(RNFError, ValueError):

    """
    An invalid specification, configuration file or parameter
    """
    exit_code = 2


class ShapeError(RNFError, ValueError):

    """
    Array shapes that do not fit the network or kernel
    """
    exit_code = 2


class StaleTraceError(ShapeError):

    """
    A forward trace that does not belong to the current parameters
    """


class NumericalError(RNFError, ArithmeticError):

    """
    Base class for numerical failures
    """
    exit_code = 3


class DecompositionError(NumericalError):

    """
    A matrix could not be factorized even after adding jitter or ridge
    """


class ConvergenceError(NumericalError):

    """
    An iterative solver did not reach its tolerance
    """


class DivergenceError(NumericalError):

    """
    Training loss exceeded the divergence threshold
    """


class NegativeRadicandError(NumericalError):

    """
    A kernel distance with a clearly negative radicand
    """


class KernelMemoryError(RNFError, MemoryError):

    """
    A tangent kernel would exceed ``pyrnf.config['max_kernel_entries']``
    """
    exit_code = 3


class DataFormatError(RNFError, IOError):

    """
    Base class for malformed data files
    """
    exit_code = 4


class BadMagicError(DataFormatError):
    pass


class TruncatedFileError(DataFormatError):
    pass


class CountMismatchError(DataFormatError):
    pass


class LabelRangeError(DataFormatError):
    pass
