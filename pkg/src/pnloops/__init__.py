"""Simulation and verification tools for the rescaled Peierls-Nabarro equation
with nested dislocation loops."""

__version__ = "0.1.0"
