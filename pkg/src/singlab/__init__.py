"""Numerical toolkit for packing-dimension bounds on weighted singular matrices."""

__version__ = "0.1.0"
