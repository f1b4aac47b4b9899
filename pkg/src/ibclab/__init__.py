"""Impedance boundary conditions for the 1D wave equation: kernels, realizations, solvers."""

__version__ = "0.1.0"
