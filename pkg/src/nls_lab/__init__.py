"""Spectral laboratory for the nonlinear Schroedinger equation i u_t + Lap u = lam |u|^p u."""

__version__ = "0.1.0"
