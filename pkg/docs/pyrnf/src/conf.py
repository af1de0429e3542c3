#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# pyRNF documentation build configuration file
#
# This file is execfile()d with the current directory set to its
# containing dir.
"""
sphinx configuration file

isort:skip_file
"""
import os
import sys

on_rtd = os.environ.get('READTHEDOCS') == 'True'

sys.path.insert(0, os.path.abspath('../../..'))
import pyrnf

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.doctest',
    'sphinx.ext.todo',
    'sphinx.ext.coverage',
    'sphinx.ext.mathjax',
    'sphinx.ext.autosummary',
    'sphinx.ext.intersphinx',
]

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'scipy': ('https://docs.scipy.org/doc/scipy/reference/', None),
    'statsmodels': ('https://www.statsmodels.org/stable/', None),
}

autodoc_mock_imports = [
    'numpy', 'scipy', 'scipy.linalg', 'scipy.special', 'scipy.integrate',
    'scipy.ndimage', 'statsmodels', 'statsmodels.tsa.stattools',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

# General information about the project.
project = 'pyRNF'
copyright = '2023, The pyRNF authors'
author = 'The pyRNF authors'

# major.feature(.minor)-dev -> major.minor
version = '.'.join(pyrnf.__version__.split('-')[0].split('.')[:2])
release = pyrnf.__version__

language = None
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'
todo_include_todos = True


# -- Options for HTML output ----------------------------------------------

if on_rtd:
    html_theme = 'default'
else:
    html_theme = 'sphinxdoc'
html_static_path = ['_static']
htmlhelp_basename = 'pyRNFdoc'


# -- Options for LaTeX output ---------------------------------------------

latex_elements = {
    'papersize': 'a4paper',
}
latex_documents = [
    (master_doc, 'pyRNF.tex', 'pyRNF Documentation', author, 'manual'),
]

man_pages = [
    (master_doc, 'pyrnf', 'pyRNF Documentation', [author], 1)
]
