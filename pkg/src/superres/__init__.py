"""Numerical laboratory for Herglotz-Nevanlinna superresolution bounds."""

__version__ = "0.1.0"
