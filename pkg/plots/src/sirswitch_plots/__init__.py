"""Render figures from the sirswitch CLI's CSV/JSON artifacts.

This package never simulates anything: it reads the files the core tool
wrote and draws them. Three figure kinds are supported:

* ``trajectory``   -- (S, I, R) sample path with the background shaded by
  the active regime;
* ``lyapunov``     -- ln I(t)/t convergence curves with a horizontal
  reference line at the threshold value, or a histogram of per-path
  terminal values when fed a samples table;
* ``persistence``  -- bar chart of persistence frequencies with 95%
  confidence intervals.
"""

from .io import (
    EnsembleSummary,
    PathTable,
    SamplesTable,
    SchemaMismatch,
    read_ensemble_json,
    read_lambda_json,
    read_path_csv,
    read_samples_csv,
)
from .figures import FigureSpec, build_figure, render

__version__ = "0.1.0"

__all__ = [
    "EnsembleSummary",
    "FigureSpec",
    "PathTable",
    "SamplesTable",
    "SchemaMismatch",
    "build_figure",
    "read_ensemble_json",
    "read_lambda_json",
    "read_path_csv",
    "read_samples_csv",
    "render",
]
