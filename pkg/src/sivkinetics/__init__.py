"""Kinetic simulation and curve fitting for electrically gated SiV charge-state conversion."""

__version__ = "0.1.0"
