# -*- coding: utf-8 -*-
#
# faultscope documentation build configuration file
#
# This file is execfile()d with the current directory set to its containing
# dir.

import os
import sys

# If extensions (or modules to document with autodoc) are in another
# directory, add these directories to sys.path here.
sys.path.append(os.path.abspath(os.path.pardir))

# -- General configuration ----------------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.doctest',
              'sphinx.ext.viewcode']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'faultscope'
copyright = '2020, faultscope developers'

# The short X.Y version and the full version, including alpha/beta/rc tags.
version = '0.4'
release = '0.4.0'

exclude_patterns = ['_build']
pygments_style = 'sphinx'

# -- Options for HTML output --------------------------------------------------

html_theme = 'default'
html_static_path = ['_static']
htmlhelp_basename = 'faultscopedoc'

# -- Options for LaTeX output -------------------------------------------------

latex_elements = {}

latex_documents = [
    ('index', 'faultscope.tex', 'faultscope Documentation',
     'faultscope developers', 'manual'),
]

# -- Options for manual page output -------------------------------------------

man_pages = [
    ('index', 'faultscope', 'faultscope Documentation',
     ['faultscope developers'], 1)
]

# -- Options for Texinfo output -----------------------------------------------

texinfo_documents = [
    ('index', 'faultscope', 'faultscope Documentation',
     'faultscope developers', 'faultscope',
     'Exhaustive fault injection simulation for ARMv6-M firmware.',
     'Miscellaneous'),
]
