"""Simulation laboratory for the naming game on the complete graph."""

__version__ = "0.1.0"
