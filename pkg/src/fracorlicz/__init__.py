"""Fractional Orlicz-Sobolev spaces: Young functions, discrete modulars and
norms, the fractional g-Laplacian, a mountain-pass solver and diagnostics
for concentration-compactness."""

__version__ = "0.1.0"
