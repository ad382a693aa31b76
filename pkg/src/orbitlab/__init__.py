"""Numerical and exact-series laboratory for the damped central-force problem."""

__version__ = "0.1.0"
