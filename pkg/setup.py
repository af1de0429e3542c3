#!/usr/bin/env python

from distutils.core import setup

from pyrnf import __version__ as version

setup(name='pyRNF',
      version=version,
      description='Random Neural Fields in the neural tangent kernel regime',
      license='GPLv3',
      author='The pyRNF authors',
      scripts=['bin/rnf-experiment.py'],
      packages=['pyrnf', 'pyrnf.fields', 'pyrnf.network', 'pyrnf.tangent',
                'pyrnf.training', 'pyrnf.perturb', 'pyrnf.io'],
      classifiers=[
          'Development Status :: 3 - Alpha',
          'Topic :: Scientific/Engineering :: Artificial Intelligence',
          'Intended Audience :: Science/Research',
          'License :: OSI Approved :: GNU General Public License v3 (GPLv3)',
          'Programming Language :: Python :: 3',
          'Programming Language :: Python :: 3.7',
      ],
      keywords=['neural tangent kernel', 'random fields', 'receptive fields'],
      tests_require=['nose'],
      )
