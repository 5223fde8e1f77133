"""Exact and numerical tools for height zeta functions of integral points on toric varieties."""

__version__ = "0.1.0"
