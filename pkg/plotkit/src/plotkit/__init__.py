"""Deterministic figure and table rendering for specelast CSV outputs."""

from .render import KINDS, PlotJob, SchemaError, render

__version__ = "0.1.0"
