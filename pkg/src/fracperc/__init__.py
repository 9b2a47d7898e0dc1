"""Fractal percolation simulation, projections and interval certificates."""
__version__ = "0.1.0"
