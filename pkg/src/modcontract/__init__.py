"""Contraction-constrained modular neural control."""

__version__ = "0.1.0"
