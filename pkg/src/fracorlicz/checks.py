"""Seeded property suites shared by the ``check`` subcommand and the tests.

Every suite returns ``{name: {"ok": bool, "worst": float, ...}}``; ``worst``
is the most adverse margin seen (negative means violated).
"""

from __future__ import annotations

import numpy as np

from . import young as _young
from .space import GridFunction, xi_sandwich
from .young import YoungFunction


def _result(ok, worst, **extra):
    return {"ok": bool(ok), "worst": float(worst), **extra}


def young_suite(Y: YoungFunction, n: int = 1000, seed: int = 0, *,
                t_max: float = 10.0) -> dict:
    """Young inequality, ``G~(g(t)) <= G(2t)``, the index bounds (L1), the
    quasi-triangle bound (L2) and the complement involution on ``[0, t_max]``."""
    rng = np.random.default_rng(seed)
    Yc = _young.complement(Y)
    idx = _young.indices(Y)
    pm, pp = idx.p_minus, idx.p_plus
    a = rng.uniform(0.0, t_max, n)
    b = rng.uniform(0.0, t_max, n)
    out = {}

    gap = _young.young_gap(Y, a, b, Yc)
    out["young_inequality"] = _result(np.min(gap) >= -1e-9, np.min(gap))

    t = rng.uniform(0.0, t_max, n)
    m = Y.G(2.0 * t) + 1e-9 - Yc.G(Y.g(t))
    out["complement_of_density"] = _result(np.min(m) >= 0, np.min(m))

    lam = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), n))
    Gab, Gb = Y.G(lam * b), Y.G(b)
    lo = np.minimum(lam ** pm, lam ** pp) * Gb
    hi = np.maximum(lam ** pm, lam ** pp) * Gb
    scale = np.maximum(Gab, 1e-300)
    m1 = np.minimum((Gab - lo) / scale, (hi - Gab) / scale) + 1e-9
    out["index_bounds"] = _result(np.min(m1) >= 0, np.min(m1), p_minus=pm, p_plus=pp)

    Gsum = Y.G(a + b)
    cap = 2.0 ** pp * (Y.G(a) + Y.G(b))
    m2 = (cap - Gsum) / np.maximum(Gsum, 1e-300) + 1e-9
    out["quasi_triangle"] = _result(np.min(m2) >= 0, np.min(m2))

    Ycc = _young.complement(Yc)
    grid = np.linspace(0.0, t_max, 201)
    err = np.max(np.abs(Ycc.G(grid) - Y.G(grid)))
    out["involution"] = _result(err <= 1e-6, 1e-6 - err, max_error=err)
    return out


def smooth_random(grid, rng, k: int = 4, amplitude: float = 1.0) -> np.ndarray:
    """Random sum of ``k`` Gaussians; zero on the truncation sphere for radial grids."""
    x = grid.nodes
    a, b = x[0], x[-1]
    span = b - a
    if grid.kind == "radial":
        span = min(span, 6.0)
    centers = rng.uniform(a, a + span, k)
    widths = rng.uniform(0.05, 0.3, k) * span
    amps = rng.normal(size=k) * amplitude
    v = np.sum(amps[:, None] * np.exp(-((x[None, :] - centers[:, None]) / widths[:, None]) ** 2),
               axis=0)
    if grid.kind == "radial":
        v[-1] = 0.0
    return v


def sandwich_suite(Y: YoungFunction, grid, n: int = 100, seed: int = 0,
                   rtol: float = 1e-6) -> dict:
    """``xi-(|u|) <= Phi(u) <= xi+(|u|)`` for both modulars on random profiles
    with amplitudes spread over four decades."""
    rng = np.random.default_rng(seed)
    idx = _young.indices(Y)
    worst = np.inf
    fails = 0
    for _ in range(n):
        amp = 10.0 ** rng.uniform(-2, 2)
        u = GridFunction(grid, smooth_random(grid, rng, amplitude=amp))
        sw = xi_sandwich(u, Y, rtol=rtol, idx=idx)
        for lo, phi, hi in (sw.LG, sw.seminorm):
            worst = min(worst, (phi - lo) / max(phi, 1e-300), (hi - phi) / max(phi, 1e-300))
        fails += not sw.ok
    return {"sandwich": _result(fails == 0, worst, draws=n, failures=fails)}


def gateaux_suite(prob, n: int = 50, seed: int = 0, h: float = 1e-2) -> dict:
    """Central differences of the energy against ``gateaux``: the error ratio
    between steps ``h`` and ``h/2`` must lie in ``[3.5, 4.5]``; the weighted
    gradient must reproduce the pairing to ``1e-10`` relative."""
    from .variational import energy, gateaux, grad

    rng = np.random.default_rng(seed)
    grid = prob.grid
    w = grid.cell_weights
    ratios, agree = [], []
    for _ in range(n):
        u = GridFunction(grid, 1.0 + 0.5 * np.tanh(smooth_random(grid, rng)))
        if grid.kind == "radial":
            u.values[-1] = 0.0
        v = GridFunction(grid, smooth_random(grid, rng))
        exact = gateaux(u, v, prob)
        errs = []
        for step in (h, 0.5 * h):
            fd = (energy(u + step * v, prob) - energy(u - step * v, prob)) / (2.0 * step)
            errs.append(abs(fd - exact))
        ratios.append(errs[0] / max(errs[1], 1e-300))
        gv = float(np.dot(w, grad(u, prob).values * v.values))
        agree.append(abs(gv - exact) / max(abs(exact), 1e-300))
    ratios = np.asarray(ratios)
    bad = np.maximum(3.5 - ratios, ratios - 4.5)
    return {
        "fd_ratio": _result(np.all(bad <= 0), -np.max(bad), min=float(ratios.min()),
                            max=float(ratios.max())),
        "gradient_pairing": _result(max(agree) <= 1e-10, 1e-10 - max(agree)),
    }
