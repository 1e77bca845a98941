"""Numerical laboratory for the inhomogeneous parabolic p-Laplace system."""

__version__ = "0.1.0"
