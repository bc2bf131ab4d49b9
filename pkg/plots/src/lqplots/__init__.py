# __init__.py
"""Figures from lqdyn CSV artifacts: true-vs-learned comparisons and
training-loss curves."""

from .render import PlotSpec, render_comparison, render_history

__version__ = "0.1.0"
