#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# fairdraw documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import datetime
import os
import sys

# autodoc reads the package from the repository root
sys.path.insert(0, os.path.abspath('..'))

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'numpydoc',
    'sphinx.ext.autosummary',
    'sphinx.ext.mathjax',
    'IPython.sphinxext.ipython_console_highlighting',
]

numpydoc_show_class_members = False
autodoc_member_order = 'bysource'

# mock the compiled stack so the docs build without it
autodoc_mock_imports = [
    'numpy',
    'xarray',
    'dask',
    'sparse',
    'pandas',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

current_year = datetime.datetime.now().year
project = 'fairdraw'
copyright = f'{current_year}, the fairdraw development team'
author = 'the fairdraw development team'

version = '0.1.0'
release = '0.1.0'

language = 'en'
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'
todo_include_todos = False

# -- Options for HTML output ----------------------------------------------

html_theme = 'sphinx_rtd_theme'
htmlhelp_basename = 'fairdrawdoc'

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {}
latex_documents = [
    (master_doc, 'fairdraw.tex', 'fairdraw Documentation', author, 'manual'),
]

# -- Options for manual page output ---------------------------------------

man_pages = [(master_doc, 'fairdraw', 'fairdraw Documentation', [author], 1)]

texinfo_documents = [
    (
        master_doc,
        'fairdraw',
        'fairdraw Documentation',
        author,
        'fairdraw',
        'Fairness and attractiveness of constrained group draws.',
        'Miscellaneous',
    ),
]
