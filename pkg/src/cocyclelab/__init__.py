"""Numerical laboratory for quasiperiodic SL(2,C) cocycles."""
__version__ = "0.1.0"
