"""Trace-driven simulation and planning for computation-aware short-video preloading."""

__version__ = "0.1.0"
