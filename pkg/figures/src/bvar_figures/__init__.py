"""Figure rendering for BVAR experiment CSV outputs.

This package consumes only the documented CSV files written by the
estimation pipeline (score panels, DMA weight trajectories, posterior
summaries, prior-density grids, induced-prior QQ tables) and renders
publication-style figures. It never touches binary draw containers.
"""

from .jobs import FigureJob, load_manifest
from .render import SchemaError, render

__all__ = ["FigureJob", "load_manifest", "render", "SchemaError"]

__version__ = "0.1.0"
