# Configuration file for the Sphinx documentation builder.
#
# For a full list of options see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html
import os
import sys

sys.path.insert(0, os.path.abspath(".."))

# -- Project information -----------------------------------------------------

project = "rfdl"

# -- General configuration ---------------------------------------------------

extensions = [
    "sphinx_click",
    "myst_parser",
    "sphinx.ext.autodoc",
]

suppress_warnings = ["myst.header"]

exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

# Don't prepend module names to object names.
add_module_names = False

# Don't include values for autodoc members.
autodoc_default_options = {"no-value": True}

autodoc_member_order = "bysource"

# -- Options for HTML output -------------------------------------------------

html_theme = "alabaster"
