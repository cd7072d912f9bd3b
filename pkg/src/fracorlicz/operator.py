"""The fractional g-Laplacian: weak pairing, pointwise form and residual."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ._numerics import gauss_legendre
from .space import GridFunction, angular_average_nodes, sphere_area
from .young import YoungFunction

__all__ = ["WeakPairing", "apply_weak", "weak_action", "apply_pointwise",
           "weak_residual", "residual_vector", "basis_norms", "test_nodes"]


class WeakPairing(NamedTuple):
    value: float
    quadrature_error_estimate: float


def apply_weak(u: GridFunction, v: GridFunction, Y: YoungFunction) -> WeakPairing:
    """``<(-Delta_g)^s u, v> = iint g(|D_s u|) sign(D_s u) D_s v dmu``.

    ``sign(0) g(0)`` is taken as 0.  The error estimate is the pairing
    restricted to nearest-neighbour pairs, a proxy for the size of the
    excluded self-cell contribution.
    """
    if u.grid is not v.grid:
        raise ValueError("grid functions live on different grids")
    pq = u.grid.pair_quadrature(Y)
    c, ce = pq.coefficients(Y, u.values)
    dv = v.values[pq.I] - v.values[pq.J]
    terms = c * dv
    val = float(np.sum(terms))
    if pq.E.size:
        val += float(np.dot(ce, v.values[pq.E]))
    near = np.abs(pq.J - pq.I) == 1
    return WeakPairing(val, float(abs(np.sum(terms[near]))))


def weak_action(u: GridFunction, Y: YoungFunction) -> np.ndarray:
    """Vector of ``<(-Delta_g)^s u, e_i>`` over the nodal basis."""
    return u.grid.pair_quadrature(Y).action(Y, u.values)


def _interior(grid, i):
    n = grid.size
    if not (0 <= i < n):
        raise IndexError(i)
    if grid.kind == "interval" and i in (0, n - 1):
        raise ValueError(f"node {i} lies on the boundary of the interval")
    if grid.kind == "radial" and i == n - 1:
        raise ValueError(f"node {i} lies on the truncation sphere")


def apply_pointwise(u: GridFunction, i: int, Y: YoungFunction, *,
                    near_field: bool = True) -> float:
    """``2 p.v. int g(|D_s u|) sign(D_s u) |x-y|^{-N-s} dy`` at node ``i``.

    The own cell of node ``i`` is removed symmetrically; on 1-D grids the
    removed part is restored to second order from the local derivatives
    (the first-order part is odd in ``y - x`` and cancels).
    """
    grid = u.grid
    _interior(grid, i)
    x, w, s, N = grid.nodes, grid.cell_weights, grid.s, grid.N
    vals = u.values
    others = np.flatnonzero(np.arange(grid.size) != i)
    diff = vals[i] - vals[others]
    if grid.kind in ("interval", "periodic"):
        d = np.abs(x[i] - x[others])
        if grid.kind == "periodic":
            d = np.minimum(d, grid.period - d)
        q = d ** (-s)
        total = 2.0 * np.sum(w[others] * Y.g(np.abs(diff) * q) * np.sign(diff) * q * d ** (-N))
        if near_field:
            total += _near_field_1d(u, i, Y)
        return float(total)
    L = grid.angular_nodes
    d, wt = angular_average_nodes(np.full(others.size, x[i]), x[others], N, L)
    q = d ** (-s)
    inner = np.sum(wt * Y.g(np.abs(diff)[:, None] * q) * q * d ** (-N), axis=1)
    total = 2.0 * np.sum(w[others] * np.sign(diff) * inner)
    total += 2.0 * _exterior_pointwise(grid, i, vals[i], Y)
    return float(total)


def _exterior_pointwise(grid, i, ui, Y, panels=24, per_panel=8, t_max=90.0):
    if ui == 0.0:
        return 0.0
    r, R, N, s = grid.nodes[i], grid.R_max, grid.N, grid.s
    delta = R - r
    edges = np.linspace(0.0, t_max, panels + 1)
    t, tw = gauss_legendre(per_panel, edges[:-1], edges[1:])
    t, tw = t.ravel(), tw.ravel()
    rho = R + delta * np.expm1(t)
    d, wt = angular_average_nodes(np.full(t.size, r), rho, N, grid.angular_nodes)
    q = d ** (-s)
    shell = sphere_area(N) * rho ** (N - 1) * delta * np.exp(t) * tw
    inner = np.sum(wt * Y.g(abs(ui) * q) * q * d ** (-N), axis=1)
    return float(np.sign(ui) * np.dot(shell, inner))


def _near_field_1d(u, i, Y, n_gl=16):
    grid = u.grid
    x, vals = grid.nodes, u.values
    n = grid.size
    if grid.kind == "periodic":
        h = grid.period / n
        up, um = vals[(i + 1) % n], vals[(i - 1) % n]
        hp = hm = h
    else:
        hp, hm = x[i + 1] - x[i], x[i] - x[i - 1]
        up, um = vals[i + 1], vals[i - 1]
    slope = (up - um) / (hp + hm)
    curv = 2.0 * ((up - vals[i]) / hp - (vals[i] - um) / hm) / (hp + hm)
    if curv == 0.0:
        return 0.0
    s = grid.s
    half = 0.5 * grid.cell_weights[i]
    z, zw = gauss_legendre(n_gl, np.log(half) - 40.0, np.log(half))
    z, zw = np.exp(z.ravel()), zw.ravel()
    arg = abs(slope) * z ** (1.0 - s)
    eps = 1e-7 * np.maximum(arg, 1e-8)
    gp = (Y.g(arg + eps) - Y.g(np.maximum(arg - eps, 0.0))) / (arg + eps - np.maximum(arg - eps, 0.0))
    # -2 u'' int_0^{h/2} g'(|u'| z^{1-s}) z^{1-2s} dz, integrated in log z
    return float(-2.0 * curv * np.sum(gp * z ** (2.0 - 2.0 * s) * zw))


def test_nodes(grid) -> np.ndarray:
    """Nodes whose hat functions are admissible test functions."""
    if grid.kind == "radial":
        return np.arange(grid.size - 1)
    return np.arange(grid.size)


def basis_norms(grid, Y: YoungFunction, iters: int = 120) -> np.ndarray:
    """``|e_i|_{L^G} + [e_i]_{W^{s,G}}`` for every nodal basis vector (cached)."""
    key = ("basis_norms", id(Y))
    hit = grid._cache.get(key)
    if hit is not None and hit[0] is Y:
        return hit[1]
    from .young import inverse_G

    w = grid.cell_weights
    lg = 1.0 / np.asarray(inverse_G(Y, 1.0 / w))
    pq = grid.pair_quadrature(Y)
    lo = np.full(grid.size, -60.0)
    hi = np.full(grid.size, 60.0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        val = pq.basis_modular(Y, np.exp(mid))
        above = val > 1.0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    semi = np.exp(-lo)
    out = lg + semi
    grid._cache[key] = (Y, out)
    return out


def residual_vector(u: GridFunction, Y: YoungFunction, nl) -> np.ndarray:
    """``<(-Delta_g)^s u, e_i> + int g(|u|) sign(u) e_i - int f(u) e_i``."""
    w = u.grid.cell_weights
    vals = u.values
    local = w * (Y.g(np.abs(vals)) * np.sign(vals) - nl.f(vals))
    return weak_action(u, Y) + local


def weak_residual(u: GridFunction, prob) -> float:
    """Max over the nodal test basis of the normalized weak-equation defect."""
    if u.grid is not prob.grid:
        raise ValueError("u must live on the problem grid")
    r = residual_vector(u, prob.Y, prob.nl)
    nodes = test_nodes(u.grid)
    scale = np.maximum(1.0, basis_norms(u.grid, prob.Y))
    return float(np.max(np.abs(r[nodes]) / scale[nodes]))
