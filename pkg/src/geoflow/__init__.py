"""Numerical and symbolic toolkit for geometric flows and G2-structures."""

__version__ = "0.1.0"
