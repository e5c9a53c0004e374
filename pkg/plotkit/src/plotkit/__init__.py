"""Figure renderer for the bosemd CSV outputs.

Couples to the simulation engine only through its CSV files: every kind
takes one or more CSVs (comment lines starting with # are skipped, the
first remaining line is the header) and writes a PNG.
"""

from .io import EmptyTableError, PlotkitError, SchemaError, load_table
from .render import KINDS, STYLE_VERSION, render, render_figure

__all__ = [
    "EmptyTableError",
    "KINDS",
    "PlotkitError",
    "STYLE_VERSION",
    "SchemaError",
    "load_table",
    "render",
    "render_figure",
]
