"""Periodic homogenization of the kinetic Fokker-Planck equation."""

__version__ = "0.1.0"
