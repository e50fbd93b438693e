"""Smoothed phase-coded FMCW radar simulation and analysis."""

__version__ = "0.1.0"
