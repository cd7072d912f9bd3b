"""Small vectorized numerical helpers shared across modules."""

from __future__ import annotations

import numpy as np

_MAX_BRACKET = 400


def bisect_increasing(fun, y, *, max_iter=200, ceiling=np.inf):
    """Solve ``fun(t) = y`` for ``t >= 0`` with ``fun`` non-decreasing.

    Vectorized over ``y``.  Returns ``(lo, hi, saturated)`` where ``lo`` and
    ``hi`` bracket the solution to within a few ulps, ``fun(lo) <= y`` and
    ``fun(hi) > y`` (so plateaus resolve to their right end).  Entries whose
    bracket could not be closed below ``ceiling`` are flagged ``saturated``.
    """
    y = np.asarray(y, dtype=float)
    shape = y.shape
    y = y.ravel()
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    saturated = np.zeros(y.shape, dtype=bool)

    # grow hi until fun(hi) > y
    idx = np.flatnonzero(fun(hi) <= y)
    for _ in range(_MAX_BRACKET):
        if not idx.size:
            break
        lo[idx] = hi[idx]
        hi[idx] *= 2.0
        over = hi[idx] > ceiling
        saturated[idx[over]] = True
        idx = idx[~over]
        idx = idx[fun(hi[idx]) <= y[idx]]
    # shrink hi while fun(hi / 2) > y, so the final bracket is relative
    idx = np.flatnonzero((lo == 0.0) & (y > 0))
    for _ in range(_MAX_BRACKET):
        if not idx.size:
            break
        half = 0.5 * hi[idx]
        ok = fun(half) > y[idx]
        hi[idx[ok]] = half[ok]
        lo[idx[~ok]] = half[~ok]
        idx = idx[ok & (half > 1e-300)]

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        live = (mid > lo) & (mid < hi)
        if not live.any():
            break
        below = fun(mid) <= y
        lo = np.where(live & below, mid, lo)
        hi = np.where(live & ~below, mid, hi)
    return lo.reshape(shape), hi.reshape(shape), saturated.reshape(shape)


def gauss_legendre(n, a=0.0, b=1.0):
    """Gauss-Legendre nodes and weights on ``[a, b]`` (broadcasting)."""
    x, w = np.polynomial.legendre.leggauss(n)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def log_grid(t_lo, t_hi, samples):
    if not (0 < t_lo < t_hi):
        raise ValueError("need 0 < t_lo < t_hi")
    return np.geomspace(t_lo, t_hi, int(samples))


def count_breaks(values, *, increasing=False, rtol=0.0):
    """Number of steps where a sequence fails to be monotone."""
    v = np.asarray(values, dtype=float)
    d = np.diff(v)
    slack = rtol * np.abs(v[:-1])
    if increasing:
        return int(np.sum(d < -slack))
    return int(np.sum(d > slack))
