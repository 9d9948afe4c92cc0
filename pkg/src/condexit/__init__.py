"""Exact and Monte Carlo checks of conditional exit-time comparisons for
random walks on lattice domains and for planar Brownian motion."""

__version__ = "0.1.0"
