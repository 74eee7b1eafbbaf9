"""Separated density-matrix descriptions of simulated spin-measurement data."""

__version__ = "0.1.0"
