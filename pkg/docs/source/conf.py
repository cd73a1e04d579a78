# -*- coding: utf-8 -*-
#
# pycanoa documentation build configuration file.

import sys, os

# Document the package from this checkout, not an installed copy.
sys.path.insert(0, os.path.abspath(os.path.join('..', '..')))

import pycanoa

extensions = ['sphinx.ext.autodoc']
autodoc_mock_imports = ['numpy', 'scipy', 'simplejson']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'pycanoa'
copyright = u'2026, The pycanoa developers'

version = '.'.join(str(v) for v in pycanoa.VERSION[:2])
release = pycanoa.__version__

exclude_patterns = []
pygments_style = 'sphinx'

html_theme = 'sphinxdoc'
html_static_path = ['_static']
htmlhelp_basename = 'pycanoadoc'

latex_documents = [
  ('index', 'pycanoa.tex', u'pycanoa Documentation',
   u'The pycanoa developers', 'manual'),
]
