"""Eigenfunction series for Brownian survival in intervals and rectangles.

Test-only reference; kept out of the package so the Monte Carlo code is
checked against an independent route.
"""

import math


def interval_survival(x, lo, hi, t, tol=1e-15):
    """``P^x(tau_(lo, hi) > t)`` for standard Brownian motion."""
    if t == 0:
        return 1.0 if lo < x < hi else 0.0
    L = hi - lo
    total = 0.0
    k = 1
    while True:
        decay = math.exp(-(k * math.pi / L) ** 2 * t / 2)
        total += 4 / (k * math.pi) * math.sin(k * math.pi * (x - lo) / L) * decay
        if decay < tol * k:
            return total
        k += 2


def rectangle_survival(z, half_width, y_lo, y_hi, t):
    return interval_survival(z[0], -half_width, half_width, t) * interval_survival(z[1], y_lo, y_hi, t)
