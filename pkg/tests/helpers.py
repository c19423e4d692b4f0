"""Seeded matrix generators shared by the test modules."""

import numpy as np


def rand_complex(rng, rows, cols, scale=1.0):
    return scale * (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols)))


def diagonalizable(rng, n, center=0.0, spread=1.0, skew=0.3):
    """Matrix with eigenvalues in a disk of the given spread around center."""
    eig = center + spread * ((rng.random(n) - 0.5) + 1j * (rng.random(n) - 0.5))
    v = np.eye(n) + skew * rng.standard_normal((n, n))
    return v @ np.diag(eig) @ np.linalg.inv(v)


def separated_pair(seed, n=6, m=5, left=-1.5, right=3.0, spread=0.4):
    """A (Re < -1.1), B (Re > +2.6) with |sigma(A)| < |sigma(B)|, plus a C."""
    rng = np.random.default_rng(seed)
    a = diagonalizable(rng, n, center=left, spread=spread)
    b = diagonalizable(rng, m, center=right, spread=spread)
    c = rand_complex(rng, n, m)
    return a, b, c
