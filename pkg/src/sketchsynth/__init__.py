"""Exemplar-based sketch-to-image synthesis toolkit."""

__version__ = "0.1.0"
