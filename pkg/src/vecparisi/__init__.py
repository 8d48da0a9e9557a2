"""Parisi PDE solver and Parisi functional for vector spin glasses."""

__version__ = "0.1.0"
