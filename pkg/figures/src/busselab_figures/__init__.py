"""Figure rendering for busselab experiment CSVs."""

from busselab_figures.render import FIGURE_KINDS, FigureSpec, SchemaError, render

__version__ = "0.1.0"
