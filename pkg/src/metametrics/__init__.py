"""Discrimination, stability and independence scores for player metrics."""

__version__ = "0.1.0"
