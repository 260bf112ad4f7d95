"""Stability analysis of conic generalized equations."""
__version__ = "0.1.0"
