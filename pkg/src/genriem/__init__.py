"""Generalized Riemannian curvature on exact Courant algebroids, evaluated numerically on coordinate charts."""

__version__ = "0.1.0"
