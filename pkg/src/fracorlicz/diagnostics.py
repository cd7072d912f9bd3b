"""Finite empirical surrogates for the compactness mechanisms.

Local integrals (balls, unit cubes, superlevel sets) are evaluated on a
lattice-aligned Cartesian box in ``R^N``; radial functions on a radial
``Grid`` use the exact spherical-cap measure instead.  Limits in ``n`` or
``|y|`` are only ever checked as trends over a finite schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.ndimage import correlate1d
from scipy.signal import fftconvolve
from scipy.special import betainc

from . import young as _young
from ._numerics import count_breaks, gauss_legendre
from .space import GridFunction, sphere_area
from .young import PreconditionError, YoungFunction

__all__ = [
    "BoxGrid", "BoxFunction", "box_around", "SequenceFamily", "ConcentrationProfile",
    "concentration", "superlevel_measure", "ball_integral_radial", "lions_vanishing_test",
    "LiebResult", "lieb_recenter", "cube_integral", "gamma_count", "strauss_decay_test",
    "lions_lieb_lab",
]


# ------------------------------------------------------------- box grids


@dataclass(frozen=True)
class BoxGrid:
    """Nodes ``h * (lower + k)``, ``0 <= k < shape``, one box cell per node."""

    h: float
    lower: tuple
    shape: tuple

    @property
    def N(self) -> int:
        return len(self.shape)

    @property
    def weight(self) -> float:
        return self.h ** self.N

    def axes(self):
        return [self.h * (lo + np.arange(n)) for lo, n in zip(self.lower, self.shape)]

    def mesh(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.mesh()))

    def sample(self, fn: Callable) -> "BoxFunction":
        """``fn`` receives the coordinate arrays ``x_1, ..., x_N``."""
        return BoxFunction(self, np.asarray(fn(*self.mesh()), dtype=float))

    def index_of(self, point) -> tuple:
        return tuple(int(round(p / self.h)) - lo for p, lo in zip(point, self.lower))


def box_around(lo, hi, h: float = 0.25) -> BoxGrid:
    """Smallest box grid of spacing ``h`` containing ``[lo, hi]`` with the
    origin on the lattice."""
    lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
    a = np.floor(lo / h - 1e-9).astype(int)
    b = np.ceil(hi / h + 1e-9).astype(int)
    return BoxGrid(float(h), tuple(int(x) for x in a), tuple(int(x) for x in (b - a + 1)))


@dataclass
class BoxFunction:
    grid: BoxGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(self.grid.shape):
            raise ValueError(f"expected shape {self.grid.shape}, got {self.values.shape}")

    def modular(self, Y: YoungFunction) -> float:
        return float(np.sum(Y.G(np.abs(self.values))) * self.grid.weight)

    def shifted(self, offset) -> "BoxFunction":
        """``x -> u(x + offset)`` for a lattice vector ``offset`` (exact index
        shift, zero fill)."""
        k = [int(round(o / self.grid.h)) for o in np.atleast_1d(offset)]
        if not np.allclose(np.asarray(k) * self.grid.h, offset, atol=1e-12):
            raise ValueError("offset must be a multiple of the grid spacing")
        out = np.zeros_like(self.values)
        src, dst = [], []
        for kk, n in zip(k, self.grid.shape):
            if abs(kk) >= n:
                return BoxFunction(self.grid, out)
            src.append(slice(max(kk, 0), n + min(kk, 0)))
            dst.append(slice(max(-kk, 0), n - max(kk, 0)))
        out[tuple(dst)] = self.values[tuple(src)]
        return BoxFunction(self.grid, out)


# ---------------------------------------------------------- local integrals


def superlevel_measure(u, tau: float) -> float:
    """``mes([|u| > tau])`` as the total weight of nodes above ``tau``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if isinstance(u, BoxFunction):
        return float(np.count_nonzero(np.abs(u.values) > tau) * u.grid.weight)
    return float(np.sum(u.grid.cell_weights[np.abs(u.values) > tau]))


def _ball_kernel(h, r, N):
    m = int(math.floor(r / h + 1e-9))
    ax = np.arange(-m, m + 1) * h
    rr = np.sqrt(sum(c * c for c in np.meshgrid(*([ax] * N), indexing="ij")))
    return (rr <= r * (1.0 + 1e-12)).astype(float)


def _lattice_indices(grid: BoxGrid, spacing: float):
    out = []
    for lo, n in zip(grid.lower, grid.shape):
        a, b = lo * grid.h, (lo + n - 1) * grid.h
        m = np.arange(math.ceil(a / spacing - 1e-9), math.floor(b / spacing + 1e-9) + 1)
        idx = np.unique(np.rint(m * spacing / grid.h).astype(int) - lo)
        out.append(idx[(idx >= 0) & (idx < n)])
    return out


def ball_integral_radial(fn: Callable, a: float, r: float, N: int, *,
                         panels: int = 64, per_panel: int = 8) -> float:
    """``int_{B_r(y)} fn(|x|) dx`` for ``|y| = a`` via the spherical-cap measure.

    The sphere of radius ``rho`` meets ``B_r(y)`` in a cap whose share of
    the sphere is ``(1 - sign(c) I_{c^2}(1/2, (N-1)/2)) / 2`` with
    ``c = (rho^2 + a^2 - r^2) / (2 rho a)``.
    """
    lo, hi = max(0.0, a - r), a + r
    if a <= r:
        # the ball contains the sphere of radius rho < r - a completely
        inner = 0.0
        if r - a > 0:
            edges = np.linspace(0.0, r - a, panels + 1)
            x, w = gauss_legendre(per_panel, edges[:-1], edges[1:])
            x, w = x.ravel(), w.ravel()
            inner = float(np.sum(w * sphere_area(N) * x ** (N - 1) * fn(x)))
        lo = r - a
    else:
        inner = 0.0
    edges = np.linspace(lo, hi, panels + 1)
    x, w = gauss_legendre(per_panel, edges[:-1], edges[1:])
    x, w = x.ravel(), w.ravel()
    c = np.clip((x * x + a * a - r * r) / (2.0 * x * max(a, 1e-300)), -1.0, 1.0)
    share = 0.5 * (1.0 - np.sign(c) * betainc(0.5, 0.5 * (N - 1), c * c))
    return inner + float(np.sum(w * sphere_area(N) * x ** (N - 1) * share * fn(x)))


def concentration(u, r: float, Y: YoungFunction) -> float:
    """``Q_r(u) = max over lattice centers y of int_{B_r(y)} G(|u|) dx``.

    Centers run over the lattice ``(r/2) Z^N`` (snapped to grid nodes when
    ``r/2`` is not a multiple of the spacing).  Radial grid functions are
    integrated with the cap formula at every lattice distance ``|y|``.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if isinstance(u, BoxFunction):
        g = u.grid
        Gu = Y.G(np.abs(u.values))
        if not np.any(Gu):
            return 0.0
        total = float(np.sum(Gu) * g.weight)
        conv = fftconvolve(Gu, _ball_kernel(g.h, r, g.N), mode="same")
        centers = _lattice_indices(g, 0.5 * r)
        q = float(np.max(conv[np.ix_(*centers)])) * g.weight
        return min(max(q, 0.0), total)
    grid = u.grid
    if grid.kind != "radial":
        raise ValueError("concentration needs a box function or a radial grid function")
    vals = u.values

    def fn(x):
        return Y.G(np.abs(np.interp(x, grid.nodes, vals, right=0.0)))

    kmax = int((2.0 * (grid.R_max + r) / r) ** 2)
    dists = (0.5 * r) * np.sqrt(_sums_of_squares(grid.N, kmax))
    return float(max(ball_integral_radial(fn, a, r, grid.N) for a in dists))


def _sums_of_squares(N: int, kmax: int, dense: int = 4096, sparse: int = 256) -> np.ndarray:
    """Integers ``k <= kmax`` that are sums of ``N >= 3`` squares: all of them
    up to ``dense``, then a geometric sample.  For ``N = 3`` the excluded
    integers are ``4^a (8b + 7)``; every integer is a sum of four squares."""
    k = np.arange(min(kmax, dense) + 1)
    if kmax > dense:
        k = np.union1d(k, np.unique(np.geomspace(dense, kmax, sparse).astype(np.int64)))
    if N == 3:
        m = k.copy()
        nz = m > 0
        while True:
            div = nz & (m % 4 == 0)
            if not np.any(div):
                break
            m[div] //= 4
        k = k[~(nz & (m % 8 == 7))]
    return k.astype(float)


# ---------------------------------------------------------- sequence labs


@dataclass
class SequenceFamily:
    """Schedules ``n = 1 .. n_max`` of box functions built from ``phi(|x|)``.

    translate   ``phi(|x - n step|)``
    vanish      ``n^{-amplitude_exponent} phi(|x| / n)``
    spike       ``n^{N spike_exponent / p} phi(n^{spike_exponent} |x|)``

    ``phi`` must vanish for ``|x| >= support``.  Each member lives on the
    smallest box of spacing ``h`` that holds its support plus a margin.
    """

    kind: str
    phi: Callable
    N: int = 3
    n_max: int = 12
    support: float = 1.0
    h: float = 0.25
    amplitude_exponent: float | None = None
    step: tuple | None = None
    spike_exponent: float = 0.5
    p: float = 2.0
    margin: float = 1.0

    def __post_init__(self):
        if self.kind not in ("translate", "vanish", "spike"):
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.amplitude_exponent is None:
            self.amplitude_exponent = float(self.N)
        if self.step is None:
            self.step = (1.0,) + (0.0,) * (self.N - 1)

    def member(self, n: int) -> BoxFunction:
        N, R = self.N, self.support
        if self.kind == "translate":
            c = np.asarray(self.step, dtype=float) * n
            grid = box_around(np.minimum(c, 0.0) - R - self.margin,
                              np.maximum(c, 0.0) + R + self.margin, self.h)
            return grid.sample(lambda *x: self.phi(np.sqrt(sum((xi - ci) ** 2
                                                               for xi, ci in zip(x, c)))))
        if self.kind == "vanish":
            ext = n * R + self.margin
            grid = box_around([-ext] * N, [ext] * N, self.h)
            amp = float(n) ** (-self.amplitude_exponent)
            return grid.sample(lambda *x: amp * self.phi(np.sqrt(sum(xi * xi for xi in x)) / n))
        lam = float(n) ** self.spike_exponent
        ext = R / lam + self.margin
        grid = box_around([-ext] * N, [ext] * N, self.h)
        amp = lam ** (N / self.p)
        return grid.sample(lambda *x: amp * self.phi(lam * np.sqrt(sum(xi * xi for xi in x))))

    def members(self):
        for n in range(1, self.n_max + 1):
            yield n, self.member(n)


def smooth_bump(r):
    """``(1 - r^2)^2`` on the unit ball, zero outside (a C^1 profile)."""
    r = np.asarray(r, dtype=float)
    return np.where(r < 1.0, (1.0 - np.minimum(r, 1.0) ** 2) ** 2, 0.0)


@dataclass
class ConcentrationProfile:
    n: list = field(default_factory=list)
    Q: list = field(default_factory=list)
    phi_G: list = field(default_factory=list)
    phi_Gstar: list = field(default_factory=list)
    phi_Psi: list = field(default_factory=list)
    superlevel: dict = field(default_factory=dict)

    def rows(self):
        return [{"n": n, "Q_r": q, "Phi_G": a, "Phi_Gstar": b, "Phi_Psi": c}
                for n, q, a, b, c in zip(self.n, self.Q, self.phi_G, self.phi_Gstar,
                                         self.phi_Psi)]


def _decays(seq, ratio, breaks=1):
    seq = np.asarray(seq, dtype=float)
    return bool(count_breaks(seq) <= breaks and seq[-1] <= ratio * seq[0])


def lions_vanishing_test(family: SequenceFamily, Psi: YoungFunction, r: float,
                         n_max: int | None = None, *, Y: YoungFunction, s: float = 0.5,
                         bound_factor: float = 10.0, trigger_ratio: float = 0.1,
                         decay_ratio: float = 1e-3, taus=(0.05, 0.1)) -> dict:
    """Check ``Q_r(u_n) -> 0  =>  Phi_Psi(u_n) -> 0`` along a family.

    Preconditions: ``Psi/G -> 0`` at the origin and ``Psi << G_*`` (finite
    surrogates), and the schedule keeps ``Phi_G`` and ``Phi_{G_*}`` within
    ``bound_factor`` of their largest early value.  The implication is
    *triggered* when ``Q_r`` decreases (at most one non-monotone step) to
    ``trigger_ratio`` of its first value; it *holds* when ``Phi_Psi`` then
    decreases the same way to ``decay_ratio`` of its first value.  An
    untriggered run is a vacuous pass.
    """
    N = family.N
    t_small = np.logspace(-1, -8, 8)
    se1_ratio = Psi.G(t_small) / Y.G(t_small)
    se1 = bool(np.all(np.diff(se1_ratio) <= 0) and se1_ratio[-1] < 1e-3)
    Gstar = _young.sobolev_conjugate(Y, N, s)
    se2 = _young.essentially_stronger(Psi, Gstar)
    if not (se1 and se2):
        raise PreconditionError(
            f"Psi fails the growth conditions: Psi/G -> 0 at 0: {se1}, Psi << G_*: {se2}")
    if n_max is not None:
        family = SequenceFamily(**{**family.__dict__, "n_max": int(n_max)})
    prof = ConcentrationProfile(superlevel={float(t): [] for t in taus})
    for n, u in family.members():
        prof.n.append(n)
        prof.Q.append(concentration(u, r, Y))
        prof.phi_G.append(u.modular(Y))
        prof.phi_Gstar.append(u.modular(Gstar))
        prof.phi_Psi.append(u.modular(Psi))
        for t in taus:
            prof.superlevel[float(t)].append(superlevel_measure(u, t))
    for name, seq in (("Phi_G", prof.phi_G), ("Phi_G*", prof.phi_Gstar)):
        ref = max(seq[0], 1e-300)
        if max(seq) > bound_factor * ref:
            raise PreconditionError(
                f"family is not bounded: max {name} = {max(seq):.4g} exceeds "
                f"{bound_factor:g} x {name}(u_1) = {ref:.4g}")
    triggered = _decays(prof.Q, trigger_ratio)
    psi_decays = _decays(prof.phi_Psi, decay_ratio)
    holds = psi_decays if triggered else True
    return {
        "family": family.kind,
        "r": r,
        "preconditions": {"SE1": se1, "SE2": se2, "bounded": True},
        "triggered": triggered,
        "vacuous": not triggered,
        "Q_decreasing": count_breaks(prof.Q) <= 1,
        "Psi_decreasing": count_breaks(prof.phi_Psi) <= 1,
        "Psi_final_ratio": prof.phi_Psi[-1] / max(prof.phi_Psi[0], 1e-300),
        "Q_spread": (max(prof.Q) - min(prof.Q)) / max(max(prof.Q), 1e-300),
        "holds": holds,
        "profile": prof,
        "note": "trend over a finite schedule; no limit is claimed",
    }


# ------------------------------------------------------------ recentring


def cube_integral(u: BoxFunction, Y: YoungFunction, scale: float = 1.0) -> np.ndarray:
    """``int_{K(y)} G(|u| / scale) dx`` for every node ``y``, ``K(y)`` the
    unit cube centred at ``y``.  Face nodes get half weight per face."""
    g = u.grid
    m = int(round(0.5 / g.h))
    if not math.isclose(m * g.h, 0.5):
        raise ValueError("unit cubes need 1/(2h) to be an integer")
    k1 = np.ones(2 * m + 1)
    k1[0] = k1[-1] = 0.5
    out = Y.G(np.abs(u.values) / scale)
    for ax in range(g.N):
        out = correlate1d(out, k1, axis=ax, mode="constant")
    return out * g.weight


def _cube_measure(u: BoxFunction, y_idx, level):
    g = u.grid
    m = int(round(0.5 / g.h))
    k1 = np.ones(2 * m + 1)
    k1[0] = k1[-1] = 0.5
    sl, wts = [], []
    for ax, (i, n) in enumerate(zip(y_idx, g.shape)):
        lo, hi = i - m, i + m + 1
        a, b = max(lo, 0), min(hi, n)
        sl.append(slice(a, b))
        wts.append(k1[a - lo:b - lo])
    block = np.abs(u.values[tuple(sl)]) > level
    w = wts[0]
    for extra in wts[1:]:
        w = np.multiply.outer(w, extra)
    return float(np.sum(w * block) * g.weight)


@dataclass
class LiebResult:
    y0: tuple
    recentered: BoxFunction
    cube_mass: float
    C4: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.C4 > 0 and self.cube_mass >= self.bound


def lieb_recenter(u: BoxFunction, tau: float, delta: float, Y: YoungFunction) -> LiebResult:
    """Translate ``u`` by the integer vector ``y0`` maximizing
    ``int_{K(y)} G(|u|/2)``; ties go to the lexicographically smallest ``y0``.

    ``C4 = mes(K(y0) ∩ [|u| > tau/2])`` and the contract is
    ``int_{K(0)} G(|v|) >= G(tau/2) C4`` with ``C4 > 0``.
    """
    mes = superlevel_measure(u, tau)
    if mes < delta:
        raise PreconditionError(f"mes([|u| > tau]) = {mes:.6g} < delta = {delta:.6g}")
    g = u.grid
    cubes = cube_integral(u, Y, 2.0)
    idx = _lattice_indices(g, 1.0)
    block = cubes[np.ix_(*idx)]
    best = float(np.max(block))
    cands = []
    for pos in zip(*np.nonzero(block >= best * (1.0 - 1e-12))):
        node = tuple(int(ix[p]) for ix, p in zip(idx, pos))
        y = tuple(int(round(g.h * (lo + k))) for lo, k in zip(g.lower, node))
        cands.append((y, node))
    y0, node = min(cands)
    v = u.shifted(np.asarray(y0, dtype=float))
    C4 = _cube_measure(u, node, 0.5 * tau)
    origin = g.index_of((0.0,) * g.N)
    if not all(0 <= i < n for i, n in zip(origin, g.shape)):
        raise ValueError("the box must contain the origin")
    mass = float(cube_integral(v, Y)[origin])
    return LiebResult(y0, v, mass, C4, float(Y.G(0.5 * tau)) * C4)


# ------------------------------------------------------------ Strauss decay


def gamma_count(y_norm: float, r: float, N: int, *, candidates: int | None = None,
                seed: int = 0) -> int:
    """Greedy count of disjoint balls ``B_r`` centred on the sphere ``|x| = |y|``.

    Centres need pairwise angular separation ``2 arcsin(r/|y|)``.  ``N = 2``
    uses the closed form ``floor(pi / arcsin(r/|y|))``; otherwise a greedy
    pass over ``+-e_N`` followed by a deterministic candidate cloud.
    """
    if y_norm <= r:
        raise PreconditionError(f"need |y| > r, got |y| = {y_norm:g}, r = {r:g}")
    beta = math.asin(r / y_norm)
    sep = 2.0 * beta
    if N == 1:
        return 2
    if N == 2:
        return int(math.floor(math.pi / beta + 1e-12))
    if candidates is None:
        candidates = int(min(200_000, max(2_000, 60.0 / sep ** (N - 1))))
    if N == 3:
        k = np.arange(candidates) + 0.5
        z = 1.0 - 2.0 * k / candidates
        phi = math.pi * (1.0 + math.sqrt(5.0)) * k
        rho = np.sqrt(1.0 - z * z)
        pts = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    else:
        pts = np.random.default_rng(seed).normal(size=(candidates, N))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pole = np.zeros(N)
    pole[-1] = 1.0
    pts = np.vstack([pole, -pole, pts])
    cos_sep = math.cos(sep) + 1e-12
    chosen = np.empty((0, N))
    for p in pts:
        if chosen.shape[0] == 0 or np.max(chosen @ p) <= cos_sep:
            chosen = np.vstack([chosen, p])
    return int(chosen.shape[0])


def strauss_decay_test(u: GridFunction, r: float, Y: YoungFunction,
                       radii=(2.0, 4.0, 8.0, 16.0), slack: float = 0.05) -> dict:
    """Check ``int_{B_r(y)} G(u) <= Phi_G(u) / gamma(|y|) (1 + slack)``.

    ``u`` lives on a radial grid and is linearly interpolated; both sides
    use the same interpolant.
    """
    grid = u.grid
    if grid.kind != "radial":
        raise ValueError("strauss_decay_test needs a radial grid function")
    N = grid.N
    vals = u.values

    def fn(x):
        return Y.G(np.abs(np.interp(x, grid.nodes, vals, right=0.0)))

    # Phi_G of the interpolant: Gauss-Legendre on each grid cell
    x, w = gauss_legendre(8, grid.nodes[:-1], grid.nodes[1:])
    phi = float(np.sum(w * sphere_area(N) * x ** (N - 1) * fn(x)))
    rows = []
    for a in radii:
        ball = ball_integral_radial(fn, float(a), r, N)
        gam = gamma_count(float(a), r, N)
        bound = phi / gam
        rows.append({"y": float(a), "ball": ball, "gamma": gam, "bound": bound,
                     "chain": gam * ball, "ok": bool(ball <= bound * (1.0 + slack))})
    bounds = [row["bound"] for row in rows]
    return {"Phi_G": phi, "rows": rows, "ok": all(row["ok"] for row in rows),
            "bound_decays": bool(bounds[-1] < bounds[0]), "slack": slack}


def lions_lieb_lab(cfg: dict, Y: YoungFunction, s: float) -> dict:
    """Run the configured lab: a Lions test and, for non-vanishing families,
    Lieb recentring of every member."""
    fam = SequenceFamily(
        kind=cfg.get("family", "vanish"), phi=smooth_bump, N=int(cfg.get("N", 3)),
        n_max=int(cfg.get("n_max", 12)), h=float(cfg.get("h", 0.25)),
        amplitude_exponent=cfg.get("amplitude_exponent"),
        step=tuple(cfg["step"]) if "step" in cfg else None,
        spike_exponent=float(cfg.get("spike_exponent", 0.5)),
        p=_young.indices(Y).p_minus)
    Psi = _young.from_spec(cfg.get("psi", "power:p=2.5"))
    r = float(cfg.get("r", 1.0))
    rep = lions_vanishing_test(fam, Psi, r, Y=Y, s=s,
                               bound_factor=float(cfg.get("bound_factor", 10.0)))
    prof = rep.pop("profile")
    rows = prof.rows()
    tau, delta = float(cfg.get("tau", 0.1)), float(cfg.get("delta", 1e-3))
    masses = []
    for row, (n, u) in zip(rows, fam.members()):
        try:
            res = lieb_recenter(u, tau, delta, Y)
            row["recenter_offset"] = list(res.y0)
            row["cube_mass"] = res.cube_mass
            masses.append(res.cube_mass)
        except PreconditionError as exc:
            row["recenter_offset"] = None
            row["cube_mass"] = None
            row["recenter_note"] = str(exc)
    rep["c5"] = min(masses) if masses and len(masses) == len(rows) else None
    rep["rows"] = rows
    return rep

