"""Numerical laboratory for classical perturbation series.

Modules
-------
series_core   truncated power series, Abel summation, radius estimates
string_lab    oscillator chain, normal modes, continuum string
inversion     Lagrange inversion and its tree expansion
kepler        series solutions of Kepler's equation
lindstedt     Lindstedt series for invariant tori
cli           command-line driver
"""

__version__ = "0.1.0"
