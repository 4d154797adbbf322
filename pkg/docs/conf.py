import sys
from datetime import datetime
from pathlib import Path

HERE = Path(__file__).parent
sys.path[:0] = [str(HERE.parent / "src")]
import rcbkit  # noqa

# -- General configuration ------------------------------------------------

nitpicky = False
needs_sphinx = "7.0"
suppress_warnings = [
    "myst.header",
]

project = "rcbkit"
author = "rcbkit development team"
copyright = f"{datetime.now():%Y}, the rcbkit development team"
version = rcbkit.__version__
release = version

master_doc = "index"
default_role = "literal"
exclude_patterns = [
    "_build",
    "Thumbs.db",
    ".DS_Store",
    # towncrier fragments are not pages
    "release-notes/+*.md",
]

extensions = [
    "myst_parser",
    "sphinx_copybutton",
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.napoleon",
    "sphinx.ext.autosummary",
    "sphinx_autodoc_typehints",  # needs to be after napoleon
]

autosummary_generate = True
autodoc_member_order = "bysource"
napoleon_google_docstring = True
napoleon_numpy_docstring = True
napoleon_include_init_with_doc = False
napoleon_use_rtype = True
napoleon_use_param = True
myst_enable_extensions = [
    "colon_fence",
    "deflist",
]
myst_heading_anchors = 3

typehints_defaults = "braces"

pygments_style = "default"
pygments_dark_style = "native"

intersphinx_mapping = dict(
    numpy=("https://numpy.org/doc/stable/", None),
    pandas=("https://pandas.pydata.org/pandas-docs/stable/", None),
    networkx=("https://networkx.org/documentation/stable/", None),
    omegaconf=("https://omegaconf.readthedocs.io/en/latest/", None),
    python=("https://docs.python.org/3", None),
)

# -- Options for HTML output ----------------------------------------------

html_theme = "sphinx_book_theme"
html_theme_options = {
    "use_repository_button": False,
}
html_show_sphinx = False
html_title = "rcbkit"
