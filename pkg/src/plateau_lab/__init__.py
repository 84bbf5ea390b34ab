"""Computational laboratory for homological spanning and Plateau-type minimization."""

__version__ = "0.1.0"
