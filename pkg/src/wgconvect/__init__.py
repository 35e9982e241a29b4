"""Weak Galerkin solver for stationary natural convection in enclosures."""

__version__ = "0.1.0"
