"""Desk-scale toolkit for randomized energy-critical NLS experiments."""

__version__ = "0.1.0"
