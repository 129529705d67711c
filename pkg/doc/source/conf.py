# Configuration file for the Sphinx documentation builder.
#
# This file only contains a selection of the most common options. For a full
# list see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

import pmeval
import pmeval.testing  # noqa: F401

# -- General configuration ----------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinx.ext.doctest',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
    'sphinx.ext.napoleon',
    'sphinx.ext.todo',
]

source_suffix = '.rst'
master_doc = 'index'

project = 'pmeval'
copyright = '2026, pmeval developers'
author = 'pmeval developers'

version = pmeval.__version__
release = pmeval.__version__

exclude_patterns = []
pygments_style = 'sphinx'
todo_include_todos = True

# -- Options for HTML output --------------------------------------------------

html_theme = 'sphinx_rtd_theme'
htmlhelp_basename = 'pmeval_doc'

# -- Options for sphinx.ext.intersphinx ---------------------------------------

intersphinx_mapping = {
    'python': ('https://docs.python.org/3/', None),
    'click': ('https://click.palletsprojects.com/en/7.x/', None),
    'dask': ('https://docs.dask.org/en/stable/', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'pandas': ('https://pandas.pydata.org/pandas-docs/stable/', None),
    'scipy': ('https://docs.scipy.org/doc/scipy/reference/', None),
    'xarray': ('https://xarray.pydata.org/en/stable/', None),
}

rst_prolog = """
.. |pmeval| replace:: :emphasis:`pmeval`
.. |version| replace:: {}
""".format(version)
