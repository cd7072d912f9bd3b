"""Discretized domains, modulars and Luxemburg norms.

Three grid kinds carry the nonlocal double integral:

``interval``
    A bounded interval ``[a, b]`` in one dimension; the double integral is
    the regional one over ``Omega x Omega``.
``periodic``
    A one-dimensional torus (minimal-image distance); used for translation
    tests.
``radial``
    The ball ``B_R`` in ``R^N`` (``N >= 3``) with radial functions.  The two
    angular integrals are reduced to a one-dimensional average over the pair
    distance, and the pairs against the exterior ``|y| > R`` (where ``u = 0``)
    are included, so the modular approximates the whole-space one.

Functions are sampled at nodes; every node owns a cell, and the pair
integral is the product rule over distinct cells (self-cell pairs are
excluded, the integrand being integrable across the diagonal).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from . import young as _young
from ._numerics import gauss_legendre
from .young import YoungFunction

__all__ = [
    "Grid",
    "GridFunction",
    "PairQuadrature",
    "HolderPair",
    "interval_grid",
    "periodic_grid",
    "radial_grid",
    "grid_from_config",
    "modular_G",
    "modular_sG",
    "luxemburg_norm",
    "norm_WsG",
    "xi_sandwich",
    "holder_pair",
    "diagonal_mass_estimate",
    "EvaluationError",
]

MAX_DOUBLINGS = 200


class EvaluationError(ArithmeticError):
    """A modular or norm could not be evaluated to a finite value."""


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere ``S^{N-1}``."""
    return float(2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0))


@dataclass(frozen=True, eq=False)
class Grid:
    kind: str
    N: int
    s: float
    nodes: np.ndarray
    cell_weights: np.ndarray
    edges: np.ndarray
    R_max: float
    angular_nodes: int = 32
    period: float | None = None
    config: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def M(self) -> int:
        return len(self.nodes) - 1

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def volume(self) -> float:
        if self.kind == "radial":
            return sphere_area(self.N) * self.R_max ** self.N / self.N
        return float(self.edges[-1] - self.edges[0])

    def pair_quadrature(self, Y: YoungFunction | None = None) -> "PairQuadrature":
        """Pair tables for this grid; collapsed when ``Y`` is a pure power."""
        key = None if Y is None else Y.homogeneity
        pq = self._cache.get(("pq", key))
        if pq is None:
            base = self._cache.get(("pq", None))
            if base is None:
                base = _build_pairs(self)
                self._cache[("pq", None)] = base
            pq = base if key is None else base.collapsed(key)
            self._cache[("pq", key)] = pq
        return pq

    def function(self, values) -> "GridFunction":
        return GridFunction(self, np.asarray(values, dtype=float))

    def sample(self, fn) -> "GridFunction":
        return GridFunction(self, np.asarray(fn(self.nodes), dtype=float))

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.size))


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _vals(other, self.grid))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _vals(other, self.grid))

    def __mul__(self, alpha):
        return GridFunction(self.grid, self.values * float(alpha))

    __rmul__ = __mul__

    def __truediv__(self, alpha):
        return GridFunction(self.grid, self.values / float(alpha))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def integral(self) -> float:
        return float(np.dot(self.grid.cell_weights, self.values))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "value"])
            for r, v in zip(self.grid.nodes, self.values):
                w.writerow([repr(float(r)), repr(float(v))])

    @classmethod
    def from_csv(cls, grid: Grid, path) -> "GridFunction":
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.reader(fh):
                try:
                    rows.append((float(rec[0]), float(rec[1])))
                except (ValueError, IndexError):
                    continue
        arr = np.asarray(rows)
        if arr.shape[0] != grid.size or not np.allclose(arr[:, 0], grid.nodes):
            raise ValueError("CSV abscissae do not match the grid")
        return cls(grid, arr[:, 1])


def _vals(other, grid):
    if isinstance(other, GridFunction):
        if other.grid is not grid:
            raise ValueError("grid functions live on different grids")
        return other.values
    return np.asarray(other, dtype=float)


# ----------------------------------------------------------- construction


def _graded_nodes(a, b, M, grading):
    if M < 2:
        raise ValueError("need M >= 2")
    if grading in (None, "uniform"):
        return np.linspace(a, b, M + 1)
    if isinstance(grading, str) and grading.startswith("geometric:"):
        q = float(grading.split(":", 1)[1])
        if q <= 0:
            raise ValueError("geometric grading needs q > 0")
        steps = q ** np.arange(M)
        x = np.concatenate([[0.0], np.cumsum(steps)])
        return a + (b - a) * x / x[-1]
    raise ValueError(f"unknown grading {grading!r}")


def interval_grid(a: float, b: float, M: int, s: float, grading="uniform") -> Grid:
    """Nodes on ``[a, b]`` with trapezoid cells; ``Omega`` is the interval."""
    if not (0.0 < s < 1.0):
        raise ValueError("need 0 < s < 1")
    x = _graded_nodes(float(a), float(b), M, grading)
    edges = np.concatenate([[x[0]], 0.5 * (x[1:] + x[:-1]), [x[-1]]])
    w = np.diff(edges)
    return Grid("interval", 1, float(s), x, w, edges, float(b - a),
                config={"kind": "interval", "N": 1, "s": s, "M": M, "a": a, "b": b,
                        "grading": grading})


def periodic_grid(length: float, M: int, s: float, a: float = 0.0) -> Grid:
    """``M`` equispaced nodes on a circle of circumference ``length``."""
    if not (0.0 < s < 1.0):
        raise ValueError("need 0 < s < 1")
    h = length / M
    x = a + h * np.arange(M)
    edges = np.concatenate([x - 0.5 * h, [x[-1] + 0.5 * h]])
    return Grid("periodic", 1, float(s), x, np.full(M, h), edges, float(length),
                period=float(length),
                config={"kind": "periodic", "N": 1, "s": s, "M": M, "length": length})


def radial_grid(N: int, s: float, M: int, R_max: float, grading="uniform",
                angular_nodes: int = 32) -> Grid:
    """Radial nodes ``0 = r_0 < ... < r_M = R_max`` in ``R^N``, ``N >= 3``."""
    if N < 3:
        raise ValueError("radial grids need N >= 3")
    if not (0.0 < s < 1.0):
        raise ValueError("need 0 < s < 1")
    r = _graded_nodes(0.0, float(R_max), M, grading)
    edges = np.concatenate([[0.0], 0.5 * (r[1:] + r[:-1]), [r[-1]]])
    w = sphere_area(N) / N * np.diff(edges ** N)
    return Grid("radial", int(N), float(s), r, w, edges, float(R_max),
                angular_nodes=int(angular_nodes),
                config={"kind": "radial", "N": N, "s": s, "M": M, "R_max": R_max,
                        "grading": grading, "angular_nodes": angular_nodes})


def grid_from_config(cfg: dict, *, N: int | None = None, s: float | None = None) -> Grid:
    """Build a grid from ``{kind, N, s, M, R_max, grading}``."""
    cfg = dict(cfg)
    kind = cfg.get("kind", "radial")
    N = int(cfg.get("N", N if N is not None else 1))
    s = float(cfg.get("s", s))
    M = int(cfg["M"])
    grading = cfg.get("grading", "uniform")
    if kind in ("radial", "radial-ND"):
        return radial_grid(N, s, M, float(cfg["R_max"]), grading,
                           int(cfg.get("angular_nodes", 32)))
    if kind in ("interval", "interval-1D"):
        if N != 1:
            raise ValueError("interval grids are one-dimensional")
        a = float(cfg.get("a", 0.0))
        b = float(cfg.get("b", cfg.get("R_max", 1.0)))
        return interval_grid(a, b, M, s, grading)
    if kind == "periodic":
        return periodic_grid(float(cfg.get("length", cfg.get("R_max", 1.0))), M, s)
    raise ValueError(f"unknown grid kind {kind!r}")


# --------------------------------------------------------- pair quadrature


class PairQuadrature:
    """Quadrature of ``iint H(u(x) - u(y), |x - y|) dmu`` on a grid.

    Interior terms are indexed by unordered node pairs ``(I, J)``, each
    carrying ``L`` sub-nodes with weights ``W`` (the factor 2 for the two
    orderings included, as is ``|x-y|^{-N}``) and Hoelder factors
    ``Q = |x-y|^{-s}``.  Exterior terms pair node ``E`` with the region
    outside the ball where ``u = 0``.  For ``G(t) = c t^p`` the sub-nodes are
    summed once into ``sum W Q^p`` with ``Q = 1``.
    """

    def __init__(self, I, J, W, Q, E, WE, QE, homogeneity=None):
        self.I, self.J, self.W, self.Q = I, J, W, Q
        self.E, self.WE, self.QE = E, WE, QE
        self.homogeneity = homogeneity

    def collapsed(self, p: float) -> "PairQuadrature":
        W = np.sum(self.W * self.Q ** p, axis=1, keepdims=True)
        WE = np.sum(self.WE * self.QE ** p, axis=1, keepdims=True)
        return PairQuadrature(self.I, self.J, W, np.ones_like(W), self.E, WE,
                              np.ones_like(WE), homogeneity=p)

    def _check(self, Y):
        if self.homogeneity is not None and Y.homogeneity != self.homogeneity:
            raise ValueError("pair tables were collapsed for another exponent")

    def modular(self, Y: YoungFunction, u: np.ndarray) -> float:
        self._check(Y)
        d = np.abs(u[self.I] - u[self.J])[:, None]
        total = float(np.sum(self.W * Y.G(d * self.Q)))
        if self.E.size:
            a = np.abs(u[self.E])[:, None]
            total += float(np.sum(self.WE * Y.G(a * self.QE)))
        return total

    def coefficients(self, Y: YoungFunction, u: np.ndarray):
        """Per-pair ``sum_l W g(|du| Q) Q sign(du)`` and the exterior analogue."""
        self._check(Y)
        du = u[self.I] - u[self.J]
        c = np.sum(self.W * Y.g(np.abs(du)[:, None] * self.Q) * self.Q, axis=1)
        c = c * np.sign(du)
        ue = u[self.E]
        ce = np.sum(self.WE * Y.g(np.abs(ue)[:, None] * self.QE) * self.QE, axis=1)
        return c, ce * np.sign(ue)

    def pairing(self, Y, u, v) -> float:
        c, ce = self.coefficients(Y, u)
        val = float(np.dot(c, v[self.I] - v[self.J]))
        if self.E.size:
            val += float(np.dot(ce, v[self.E]))
        return val

    def action(self, Y, u) -> np.ndarray:
        """Pairings of ``u`` against every nodal basis vector."""
        c, ce = self.coefficients(Y, u)
        n = len(u)
        out = np.bincount(self.I, c, n) - np.bincount(self.J, c, n)
        if self.E.size:
            out += np.bincount(self.E, ce, n)
        return out

    def basis_modular(self, Y: YoungFunction, scale: np.ndarray) -> np.ndarray:
        """``Phi_sG(e_i * scale_i)`` for every nodal basis vector ``e_i``."""
        self._check(Y)
        n = len(scale)
        gi = np.sum(self.W * Y.G(scale[self.I][:, None] * self.Q), axis=1)
        gj = np.sum(self.W * Y.G(scale[self.J][:, None] * self.Q), axis=1)
        out = np.bincount(self.I, gi, n) + np.bincount(self.J, gj, n)
        if self.E.size:
            out += np.bincount(self.E, np.sum(self.WE * Y.G(scale[self.E][:, None] * self.QE),
                                              axis=1), n)
        return out


def _build_pairs(grid: Grid) -> PairQuadrature:
    n = grid.size
    I, J = np.triu_indices(n, k=1)
    x, w, s, N = grid.nodes, grid.cell_weights, grid.s, grid.N
    empty_i = np.zeros(0, dtype=np.intp)
    if grid.kind in ("interval", "periodic"):
        d = np.abs(x[I] - x[J])
        if grid.kind == "periodic":
            d = np.minimum(d, grid.period - d)
        W = (2.0 * w[I] * w[J] * d ** (-N))[:, None]
        Q = (d ** (-s))[:, None]
        return PairQuadrature(I, J, W, Q, empty_i, np.zeros((0, 1)), np.zeros((0, 1)))
    if grid.kind != "radial":
        raise ValueError(f"no pair quadrature for grid kind {grid.kind!r}")
    L = grid.angular_nodes
    W = np.empty((len(I), L))
    Q = np.empty((len(I), L))
    chunk = max(1, 2_000_000 // L)
    for lo in range(0, len(I), chunk):
        sl = slice(lo, lo + chunk)
        d, wt = angular_average_nodes(x[I[sl]], x[J[sl]], N, L)
        W[sl] = 2.0 * (w[I[sl]] * w[J[sl]])[:, None] * wt * d ** (-N)
        Q[sl] = d ** (-s)
    E, WE, QE = _exterior_nodes(grid)
    return PairQuadrature(I, J, W, Q, E, WE, QE)


def angular_average_nodes(r, rho, N, L):
    """Nodes ``d`` and weights for the normalized angular average of ``F(|x-y|)``.

    With ``|x| = r``, ``|y| = rho`` and the angle between them distributed
    as on ``S^{N-1}``, returns ``(d, wt)`` of shape ``(len(r), L)`` such that
    ``sum(wt * F(d))`` approximates the average.  Gauss-Legendre nodes are
    placed in ``log d`` on ``[|r - rho|, r + rho]``.
    """
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    a = np.abs(r - rho)
    b = r + rho
    degenerate = (r == 0) | (rho == 0)
    a_safe = np.where(degenerate, 1.0, a)
    b_safe = np.where(degenerate, 2.0, b)
    lg, lw = gauss_legendre(L, np.log(a_safe), np.log(b_safe))
    d = np.exp(lg)
    B = np.where(degenerate, 1.0, 2.0 * r * rho)[:, None]
    # dc = 2 d dd / B = 2 d^2 dlog(d) / B; weight (1-c^2)^{(N-3)/2} / Z
    logZ = math.log(math.pi) / 2 + gammaln((N - 1) / 2.0) - gammaln(N / 2.0)
    wt = lw * 2.0 * d * d / B
    if N != 3:
        A = (r * r + rho * rho)[:, None]
        c = np.clip((A - d * d) / B, -1.0, 1.0)
        wt = wt * (1.0 - c * c) ** ((N - 3) / 2.0)
    wt = wt * math.exp(-logZ)
    if degenerate.any():
        k = np.flatnonzero(degenerate)
        d[k] = np.maximum(r[k], rho[k])[:, None]
        wt[k] = 1.0 / L
    return d, wt


def _exterior_nodes(grid: Grid, panels: int = 24, per_panel: int = 8, t_max: float = 90.0):
    """Pairs of each node with the exterior ``|y| > R`` (both orderings)."""
    r, w, R, N, s = grid.nodes, grid.cell_weights, grid.R_max, grid.N, grid.s
    L = grid.angular_nodes
    h_last = r[-1] - r[-2]
    delta = np.maximum(R - r, 0.5 * h_last)
    edges = np.linspace(0.0, t_max, panels + 1)
    t, tw = gauss_legendre(per_panel, edges[:-1], edges[1:])
    t, tw = t.ravel(), tw.ravel()
    K = t.size
    n = grid.size
    WE = np.empty((n, K * L))
    QE = np.empty((n, K * L))
    area = sphere_area(N)
    for i in range(n):
        rho = R + delta[i] * np.expm1(t)
        jac = delta[i] * np.exp(t) * tw
        d, wt = angular_average_nodes(np.full(K, r[i]), rho, N, L)
        shell = area * rho ** (N - 1) * jac
        WE[i] = (2.0 * w[i] * shell[:, None] * wt * d ** (-N)).ravel()
        QE[i] = (d ** (-s)).ravel()
    return np.arange(n), WE, QE


# ----------------------------------------------------------------- modulars


def modular_G(u: GridFunction, Y: YoungFunction) -> float:
    """``sum_i w_i G(|u_i|)``."""
    return float(np.dot(u.grid.cell_weights, Y.G(np.abs(u.values))))


def modular_sG(u: GridFunction, Y: YoungFunction) -> float:
    """Discrete ``iint G(|D_s u|) dmu`` with self-cell pairs excluded."""
    return u.grid.pair_quadrature(Y).modular(Y, u.values)


def _modular(which):
    if which in ("LG", "L", "lg"):
        return modular_G
    if which in ("seminorm", "sG", "s"):
        return modular_sG
    raise ValueError(f"unknown modular {which!r}")


def luxemburg_from_modular(phi, tol: float = 1e-10) -> float:
    """``inf{lam > 0 : phi(lam) <= 1}`` for ``phi(lam) = Phi(u / lam)`` decreasing."""
    v1 = phi(1.0)
    if not np.isfinite(v1):
        v1 = np.inf
    if v1 == 0.0:
        return 0.0
    lo, hi = 1.0, 1.0
    if v1 > 1.0:
        for _ in range(MAX_DOUBLINGS):
            hi *= 2.0
            if phi(hi) <= 1.0:
                break
            lo = hi
        else:
            raise EvaluationError("modular stays above 1 after 200 doublings")
    else:
        for _ in range(MAX_DOUBLINGS):
            lo *= 0.5
            val = phi(lo)
            if val > 1.0:
                break
            if val == 0.0:
                return 0.0
            hi = lo
        else:
            raise EvaluationError("modular stays below 1 after 200 halvings")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if phi(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def luxemburg_norm(u: GridFunction, Y: YoungFunction, which: str = "LG",
                   tol: float = 1e-10) -> float:
    """Luxemburg norm for the ``LG`` modular or the Gagliardo ``seminorm``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    mod = _modular(which)
    if not np.any(u.values):
        return 0.0
    return luxemburg_from_modular(lambda lam: mod(u / lam, Y), tol)


def norm_WsG(u: GridFunction, Y: YoungFunction, tol: float = 1e-10) -> float:
    return luxemburg_norm(u, Y, "LG", tol) + luxemburg_norm(u, Y, "seminorm", tol)


class Sandwich(NamedTuple):
    LG: tuple
    seminorm: tuple
    ok: bool


def _xi(t, pm, pp):
    a, b = t ** pm, t ** pp
    return min(a, b), max(a, b)


def xi_sandwich(u: GridFunction, Y: YoungFunction, *, rtol: float = 1e-6,
                tol: float = 1e-12, idx=None) -> Sandwich:
    """``(xi-(|u|), Phi(u), xi+(|u|))`` for both modulars and the sandwich flag."""
    idx = _young.indices(Y) if idx is None else idx
    pm, pp = idx.p_minus, idx.p_plus
    out = []
    ok = True
    for which in ("LG", "seminorm"):
        phi = _modular(which)(u, Y)
        nrm = luxemburg_norm(u, Y, which, tol)
        lo, hi = _xi(nrm, pm, pp)
        ok &= lo * (1.0 - rtol) <= phi <= hi * (1.0 + rtol) + 1e-300
        out.append((lo, phi, hi))
    return Sandwich(out[0], out[1], bool(ok))


class HolderPair(NamedTuple):
    integral: float
    norm_product: float
    constant: float
    ok: bool


def holder_pair(u: GridFunction, v: GridFunction, Y: YoungFunction,
                Yc: YoungFunction | None = None, tol: float = 1e-10,
                rtol: float = 1e-6) -> HolderPair:
    """``int |u v|`` against ``|u|_{L^G} |v|_{L^G~}``.

    With Luxemburg norms on both factors the inequality carries the
    constant 2 (``G = t^2/2``, ``u = v`` gives ``int u^2 = 2 |u|^2``);
    ``ok`` checks ``integral <= 2 norm_product (1 + rtol)``.
    """
    if u.grid is not v.grid:
        raise ValueError("grid functions live on different grids")
    Yc = _young.complement(Y) if Yc is None else Yc
    lhs = float(np.dot(u.grid.cell_weights, np.abs(u.values * v.values)))
    rhs = luxemburg_norm(u, Y, "LG", tol) * luxemburg_norm(v, Yc, "LG", tol)
    return HolderPair(lhs, rhs, 2.0, bool(lhs <= 2.0 * rhs * (1.0 + rtol)))


def diagonal_mass_estimate(u: GridFunction, Y: YoungFunction) -> float:
    """Estimate of the self-cell mass dropped from ``modular_sG`` (1-D only).

    Uses the local slope ``u'`` at each node:
    ``w_i * 2 int_0^{h_i/2} G(|u'| z^{1-s}) z^{-1} dz``.
    """
    g = u.grid
    if g.kind not in ("interval", "periodic"):
        raise ValueError("diagonal estimate is implemented for 1-D grids")
    slope = np.gradient(u.values, g.nodes)
    half = 0.5 * g.cell_weights
    z, zw = gauss_legendre(24, np.log(half) - 30.0, np.log(half))
    zz = np.exp(z)
    vals = Y.G(np.abs(slope)[:, None] * zz ** (1.0 - g.s)) * zw
    return float(np.sum(g.cell_weights * 2.0 * vals.sum(axis=1)))
