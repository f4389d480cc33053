"""Coherent energy transfer between two-level systems: closed-form and numerical engines."""

__version__ = "0.1.0"
