#!/usr/bin/env python

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
Run one of the pyRNF experiments, e.g.

    rnf-experiment.py regress --config regress.json --out runs/table -v
    rnf-experiment.py ntk-check --model 1 --width 2048 --out runs/ntk
    rnf-experiment.py regress --replay runs/table/manifest.json --out rerun

The MNIST files are looked up in $RNF_DATA_DIR (see the fetch command).
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""
import sys

from pyrnf.experiments import main


if __name__ == '__main__':
    sys.exit(main())
