"""Exact exterior algebra for exceptional-holonomy forms, lattice-graded
Morse-Novikov complexes, exponential-sum cocycles and a lattice Fueter operator."""

__version__ = "0.1.0"
