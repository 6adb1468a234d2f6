"""Numerical laboratory for the defocusing quintic stochastic NLS on the 3-torus."""

__version__ = "0.1.0"
