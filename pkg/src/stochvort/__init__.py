"""Pseudo-spectral simulation and verification toolkit for 2D stochastic vorticity on the torus."""

__version__ = "0.1.0"
