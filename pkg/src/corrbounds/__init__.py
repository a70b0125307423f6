"""Exact and Monte Carlo tools for correlation detection under memory and communication limits."""

__version__ = "0.1.0"
