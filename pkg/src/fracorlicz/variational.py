"""Energy, its derivative, mountain-pass geometry and the minimax solver.

The discrete energy is

    T(u) = Phi_sG(u) + Phi_G(u) - sum_i w_i F(u_i),

and every derivative below is the exact derivative of this sum, so the weak
residual, the Gateaux derivative and the gradient are one discrete object
seen three ways.
"""

from __future__ import annotations

import json
import logging
import math
import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import young as _young
from .operator import basis_norms, residual_vector, test_nodes, weak_residual
from .problem import Nonlinearity, ProblemSpec, SolverParams  # noqa: F401  (re-export)
from .space import EvaluationError, Grid, GridFunction, luxemburg_norm
from .young import YoungFunction

__all__ = [
    "Nonlinearity", "ProblemSpec", "SolverParams", "SolveReport", "Geometry",
    "FConditionsReport", "GeometryError", "DegeneratePathError", "ConditionsError",
    "energy", "energy_terms", "gateaux", "grad", "gradient_dual_norm",
    "check_f_conditions", "mountain_pass_geometry", "solve_mountain_pass",
    "ps_monitor", "szulkin_check", "radialize",
]

log = logging.getLogger(__name__)


class GeometryError(RuntimeError):
    """No mountain-pass geometry was found within the configured limits."""


class DegeneratePathError(RuntimeError):
    """The path maximum collapsed onto the origin."""


class ConditionsError(ValueError):
    """The structural conditions on ``f`` failed their finite surrogates."""

    def __init__(self, report):
        super().__init__("conditions on f failed: " + "; ".join(report.failures()))
        self.report = report


# ------------------------------------------------------------------ energy


class _Model:
    """Energy evaluations bound to one problem (pair tables resolved once)."""

    def __init__(self, prob: ProblemSpec):
        self.prob = prob
        self.Y = prob.Y
        self.nl = prob.nl
        self.grid = prob.grid
        self.w = prob.grid.cell_weights
        self.pq = prob.grid.pair_quadrature(prob.Y)
        self.free = np.ones(prob.grid.size, dtype=bool)
        if prob.grid.kind == "radial":
            self.free[-1] = False
        self.hom = prob.Y.homogeneity

    def terms(self, u):
        J = self.pq.modular(self.Y, u)
        I = float(np.dot(self.w, self.Y.G(np.abs(u))))
        Fv = self.nl.F(u)
        if not np.all(np.isfinite(Fv)):
            raise EvaluationError("F is not finite on the iterate")
        return J, I, float(np.dot(self.w, Fv))

    def value(self, u):
        with np.errstate(over="ignore", invalid="ignore"):
            try:
                J, I, Fs = self.terms(u)
            except ArithmeticError:
                return np.nan
        return J + I - Fs

    def euclid(self, u):
        return residual_vector(GridFunction(self.grid, u), self.Y, self.nl)

    def grad(self, u):
        out = self.euclid(u) / self.w
        out[~self.free] = 0.0
        return out

    def inner(self, a, b):
        return float(np.dot(self.w, a * b))

    def norm(self, u):
        """``W^{s,G}`` norm (closed form for pure powers)."""
        if self.hom is not None:
            p = self.hom
            return (float(np.dot(self.w, self.Y.G(np.abs(u)))) ** (1.0 / p)
                    + self.pq.modular(self.Y, u) ** (1.0 / p))
        gf = GridFunction(self.grid, u)
        tol = self.prob.solver.bisection_tol
        return luxemburg_norm(gf, self.Y, "LG", tol) + luxemburg_norm(gf, self.Y, "seminorm", tol)

    def ray_slope(self, u):
        """``t -> d/dt T(t u)``."""
        if self.hom is not None:
            p = self.hom
            J, I, _ = self.terms(u)
            A = p * (J + I)

            def slope(t):
                return A * t ** (p - 1.0) - float(np.dot(self.w, self.nl.f(t * u) * u))
        else:
            def slope(t):
                return float(np.dot(self.euclid(t * u), u))
        return slope

    def ray_max(self, u, t_guess=1.0):
        """Maximizer ``t > 0`` of ``T(t u)``; ``None`` if the ray never descends."""
        slope = self.ray_slope(u)
        lo = hi = t_guess
        if slope(hi) > 0:
            for _ in range(200):
                lo, hi = hi, hi * 2.0
                if slope(hi) < 0:
                    break
            else:
                return None
        else:
            for _ in range(200):
                hi, lo = lo, lo * 0.5
                if slope(lo) > 0:
                    break
            else:
                return None
        return brentq(slope, lo, hi, xtol=1e-14 * hi, rtol=1e-15, maxiter=200)


_MODELS: "weakref.WeakKeyDictionary[ProblemSpec, _Model]" = weakref.WeakKeyDictionary()


def _model(prob):
    m = _MODELS.get(prob)
    if m is None:
        m = _MODELS[prob] = _Model(prob)
    return m


def energy_terms(u: GridFunction, prob: ProblemSpec) -> dict:
    """``{"J": Phi_sG, "I": Phi_G, "F": sum w F(u), "T": J + I - F}``."""
    J, I, Fs = _model(prob).terms(u.values)
    return {"J": J, "I": I, "F": Fs, "T": J + I - Fs}


def energy(u: GridFunction, prob: ProblemSpec) -> float:
    """``T(u)``; raises ``EvaluationError`` when ``F(u)`` is not finite."""
    J, I, Fs = _model(prob).terms(u.values)
    return J + I - Fs


def gateaux(u: GridFunction, v: GridFunction, prob: ProblemSpec) -> float:
    """``<(-Delta_g)^s u, v> + int g(|u|) sign(u) v - int f(u) v``."""
    from .operator import apply_weak

    w = prob.grid.cell_weights
    uv, vv = u.values, v.values
    local = float(np.dot(w, (prob.Y.g(np.abs(uv)) * np.sign(uv) - prob.nl.f(uv)) * vv))
    return apply_weak(u, v, prob.Y).value + local


def grad(u: GridFunction, prob: ProblemSpec) -> GridFunction:
    """Mass-weighted gradient: ``sum_i grad_i v_i w_i = gateaux(u, v)``.

    On radial grids the node on the truncation sphere is held at zero, so
    its gradient entry is zero.
    """
    return GridFunction(prob.grid, _model(prob).grad(u.values))


def gradient_dual_norm(u: GridFunction, prob: ProblemSpec) -> float:
    """``max_i |dT/du_i| / max(1, |e_i|)`` over admissible nodes."""
    m = _model(prob)
    g = m.grad(u.values) * m.w
    nodes = test_nodes(prob.grid)
    scale = np.maximum(1.0, basis_norms(prob.grid, prob.Y))
    return float(np.max(np.abs(g[nodes]) / scale[nodes]))


# ------------------------------------------------------------- conditions


@dataclass
class FConditionsReport:
    f1: bool
    f2: bool
    f3: bool
    m1: bool
    witnesses: dict
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.f1 and self.f2 and self.f3 and self.m1

    def failures(self):
        return [k for k in ("f1", "f2", "f3", "m1") if not getattr(self, k)]

    def to_dict(self):
        return {"f1": self.f1, "f2": self.f2, "f3": self.f3, "m1": self.m1, "ok": self.ok,
                "witnesses": self.witnesses, "notes": list(self.notes)}


def check_f_conditions(nl: Nonlinearity, Y: YoungFunction, grid: Grid, *,
                       small=None, large=None, f1_tol: float = 1e-3) -> FConditionsReport:
    """Finite surrogates for (f1), (f2), (f3) and (m1).

    (f1)  ``f/g`` on ``t = 1e-1 ... 1e-8`` is decreasing and ends below
          ``f1_tol``;
    (f2)  ``|f|/m`` on ``[1, 1e6]`` is finite and not growing over the last
          decade;
    (f3)  ``0 < theta F(t) <= f(t) t`` on a two-sided sample and
          ``theta > p+``;
    (m1)  indices of ``M`` satisfy ``p+ < m- <= m+ < N p- / (N - s p-)``.
    """
    small = np.logspace(-1, -8, 8) if small is None else np.asarray(small)
    large = np.logspace(0, 6, 61) if large is None else np.asarray(large)
    idx = _young.indices(Y)
    wit, notes = {}, []

    ratio = np.abs(nl.f(small)) / Y.g(small)
    f1 = bool(np.all(np.diff(ratio) <= 0) and ratio[-1] < f1_tol)
    wit["f1"] = {"t": small.tolist(), "f_over_g": ratio.tolist()}

    if nl.M_fn is None:
        f2 = not np.any(nl.f(large))
        wit["f2"] = {"note": "no comparison function M"}
        m1 = False
        wit["m1"] = {"note": "no comparison function M"}
    else:
        rf = np.abs(nl.f(large)) / nl.M_fn.g(large)
        decade = large >= large[-1] / 10.0
        f2 = bool(np.all(np.isfinite(rf)) and rf[-1] <= 1.01 * np.max(rf[decade][:1]) + 1e-300)
        wit["f2"] = {"sup_f_over_m": float(np.max(rf)), "at": float(large[int(np.argmax(rf))])}
        midx = _young.indices(nl.M_fn)
        wit["m1"] = {"m_minus": midx.p_minus, "m_plus": midx.p_plus,
                     "p_minus": idx.p_minus, "p_plus": idx.p_plus}
        try:
            pstar = _young.sobolev_exponent(idx.p_minus, grid.N, grid.s)
            wit["m1"]["p_minus_star"] = pstar
            m1 = bool(idx.p_plus < midx.p_minus <= midx.p_plus < pstar)
        except _young.PreconditionError as exc:
            wit["m1"]["p_minus_star"] = None
            notes.append(str(exc))
            m1 = False

    ts = np.concatenate([-np.logspace(-6, 4, 41), np.logspace(-6, 4, 41)])
    Fv, ft = nl.F(ts), nl.f(ts) * ts
    lhs = nl.theta * Fv
    f3_samples = bool(np.all(Fv > 0) and np.all(lhs <= ft * (1.0 + 1e-12) + 1e-300))
    f3 = f3_samples and nl.theta > idx.p_plus
    k = int(np.argmax(lhs - ft))
    wit["f3"] = {"theta": nl.theta, "p_plus": idx.p_plus, "worst_t": float(ts[k]),
                 "theta_F_minus_ft": float(lhs[k] - ft[k])}
    if not nl.odd_extension:
        notes.append("f for t < 0 taken from the user table")
    return FConditionsReport(f1, f2, f3, m1, wit, notes)


# --------------------------------------------------------------- geometry


@dataclass
class Geometry:
    rho: float
    delta_rho: float
    e: GridFunction
    t0: float
    energy_e: float
    sphere_min: float

    def to_dict(self):
        return {"rho": self.rho, "delta_rho": self.delta_rho, "t0": self.t0,
                "energy_e": self.energy_e, "norm_e": None, "sphere_min": self.sphere_min}


def _bump(grid):
    if grid.kind == "radial":
        vals = np.exp(-grid.nodes ** 2)
        vals[-1] = 0.0
        return vals
    a, b = grid.nodes[0], grid.nodes[-1]
    c, half = 0.5 * (a + b), 0.5 * (b - a)
    z = (grid.nodes - c) / half
    vals = np.exp(-(3.0 * z) ** 2) - math.exp(-9.0)
    return np.maximum(vals, 0.0)


def random_directions(grid, n, rng):
    """Smooth random profiles (sums of Gaussians), zero on the boundary."""
    x = grid.nodes
    span = x[-1] - x[0]
    out = []
    for _ in range(n):
        k = rng.integers(1, 4)
        centers = x[0] + rng.uniform(0.0, 0.5, k) * span
        widths = rng.uniform(0.05, 0.2, k) * span
        amps = rng.normal(size=k)
        v = np.sum(amps[:, None] * np.exp(-((x[None, :] - centers[:, None]) / widths[:, None]) ** 2),
                   axis=0)
        if grid.kind == "radial":
            v[-1] = 0.0
        else:
            v -= np.linspace(v[0], v[-1], v.size)
        out.append(v)
    return out


def mountain_pass_geometry(prob: ProblemSpec, *, enforce_conditions: bool = True) -> Geometry:
    """Find ``rho``, ``delta_rho > 0`` and ``e`` with ``T(e) < 0``, ``|e| > rho``."""
    if enforce_conditions:
        rep = check_f_conditions(prob.nl, prob.Y, prob.grid)
        if not rep.ok:
            raise ConditionsError(rep)
    m = _model(prob)
    sp = prob.solver
    rng = np.random.default_rng(sp.seed)
    dirs = random_directions(prob.grid, sp.geometry_directions, rng)
    psi = _bump(prob.grid)
    dirs.append(psi)
    units = []
    for v in dirs:
        nv = m.norm(v)
        if nv > 0:
            units.append(v / nv)
    rho = sp.rho_start
    sphere_min = -np.inf
    while rho >= sp.rho_min:
        vals = [m.value(rho * v) for v in units]
        sphere_min = min(vals)
        if sphere_min > 0:
            break
        rho *= 0.5
    else:
        raise GeometryError(f"no sphere with positive energy found down to rho={sp.rho_min:g}")
    t0 = 1.0
    npsi = m.norm(psi)
    while True:
        e = t0 * psi
        Te = m.value(e)
        if Te < 0 and t0 * npsi > rho:
            break
        t0 *= 2.0
        if t0 > sp.t0_max:
            raise GeometryError(f"T(t psi) stayed >= 0 up to t = {sp.t0_max:g}; no e exists")
    return Geometry(rho, float(sphere_min), GridFunction(prob.grid, e), t0, float(Te),
                    float(sphere_min))


# ------------------------------------------------------------------ solver


@dataclass
class SolveReport:
    u_star: GridFunction
    level_c: float
    residual: float
    geometry: Geometry
    trace: list
    converged: bool
    nontrivial: bool
    radial: bool
    grad_norm: float
    iterations: int
    norm_LG: float
    iterates: list = field(default_factory=list, repr=False)
    messages: list = field(default_factory=list)
    terms: dict = field(default_factory=dict)

    def to_dict(self):
        g = self.geometry
        return {
            "level_c": self.level_c,
            "residual": self.residual,
            "converged": self.converged,
            "nontrivial": self.nontrivial,
            "radial": self.radial,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "norm_LG": self.norm_LG,
            "energy_terms": self.terms,
            "geometry": {"rho": g.rho, "delta_rho": g.delta_rho, "t0": g.t0,
                         "energy_e": g.energy_e},
            "trace": self.trace,
            "messages": self.messages,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _reequidistribute(m, path):
    seg = np.array([m.norm(path[k + 1] - path[k]) for k in range(len(path) - 1)])
    total = seg.sum()
    if total == 0:
        return path
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, total, len(path))
    out = [path[0]]
    for tgt in targets[1:-1]:
        k = min(int(np.searchsorted(cum, tgt, side="right")) - 1, len(seg) - 1)
        lam = (tgt - cum[k]) / seg[k] if seg[k] > 0 else 0.0
        out.append((1.0 - lam) * path[k] + lam * path[k + 1])
    out.append(path[-1])
    return out


def _armijo(m, u, Tu, direction, slope, alpha, sp):
    """Backtracking from ``alpha``; returns ``(alpha, u_new, T_new)`` or ``None``."""
    for _ in range(sp.max_halvings + 1):
        trial = u + alpha * direction
        trial[~m.free] = 0.0
        Tt = m.value(trial)
        if np.isfinite(Tt) and Tt <= Tu + sp.armijo * alpha * slope:
            return alpha, trial, Tt
        alpha *= 0.5
    return None


def solve_mountain_pass(prob: ProblemSpec, geometry: Geometry | None = None, *,
                        enforce_conditions: bool = True) -> SolveReport:
    """Discrete minimax over paths from ``0`` to ``e``.

    Phase 1 deforms a ``K``-segment path: the highest node takes an Armijo
    descent step and the path is re-equidistributed in the ``W^{s,G}`` norm
    every few iterations.  Phase 2 refines the highest node: it is moved to
    the maximum of the energy along its ray and then descends orthogonally
    to the ray (Armijo on the ray-maximized energy), which makes the saddle
    a fixed point.  Stops when the mass-weighted gradient norm falls below
    ``tol_grad * |e|``.
    """
    sp = prob.solver
    if geometry is None:
        geometry = mountain_pass_geometry(prob, enforce_conditions=enforce_conditions)
    m = _model(prob)
    e = geometry.e.values.copy()
    norm_e = m.norm(e)
    tol = sp.tol_grad * max(norm_e, 1.0)
    K = sp.K
    path = [k / K * e for k in range(K + 1)]
    Tpath = [m.value(z) for z in path]
    trace, iterates, messages = [], [], []
    alpha = 1.0
    converged = False
    gnorm = np.inf
    it = 0

    def record(phase, Tmax, gn, k):
        if it % sp.trace_every == 0:
            trace.append({"iter": it, "phase": phase, "max_energy": Tmax, "grad_norm": gn,
                          "node": k})

    # phase 1: path deformation
    for it in range(min(sp.path_phase_iters, sp.max_iter)):
        k = 1 + int(np.argmax(Tpath[1:-1]))
        z = path[k]
        g = m.grad(z)
        gnorm = math.sqrt(m.inner(g, g))
        record(1, Tpath[k], gnorm, k)
        if it % sp.store_iterates_every == 0:
            iterates.append(z.copy())
        if gnorm < tol:
            converged = True
            break
        alpha = min(alpha, float(np.max(np.abs(z))) / max(float(np.max(np.abs(g))), 1e-300))
        step = _armijo(m, z, Tpath[k], -g, -gnorm ** 2, alpha, sp)
        if step is None:
            messages.append(f"phase 1 line search failed at iteration {it}")
            break
        alpha, path[k], Tpath[k] = step
        alpha *= 2.0
        if (it + 1) % sp.reequidistribute_every == 0:
            path = _reequidistribute(m, path)
            Tpath = [m.value(z) for z in path]
    k = 1 + int(np.argmax(Tpath[1:-1]))
    u = path[k].copy()
    if m.norm(u) < 1e-12 * max(norm_e, 1.0):
        raise DegeneratePathError("path maximum collapsed onto the origin")

    # phase 2: ray-maximized descent at the highest node
    start = it + 1
    prev = None
    if not converged:
        t = m.ray_max(u)
        if t is None:
            raise GeometryError("energy does not decrease along the ray of the path maximum")
        u = t * u
        Tu = m.value(u)
        for it in range(start, sp.max_iter):
            g = m.grad(u)
            gnorm = math.sqrt(m.inner(g, g))
            record(2, Tu, gnorm, k)
            if it % sp.store_iterates_every == 0:
                iterates.append(u.copy())
            if gnorm < tol:
                converged = True
                break
            d = -(g - m.inner(g, u) / m.inner(u, u) * u)
            d[~m.free] = 0.0
            slope = -m.inner(d, d)
            if prev is not None:
                du, dg = u - prev[0], g - prev[1]
                denom = m.inner(du, dg)
                if denom > 0:
                    alpha = m.inner(du, du) / denom
            accepted = None
            a = alpha
            for _ in range(sp.max_halvings + 1):
                trial = u + a * d
                trial[~m.free] = 0.0
                tt = m.ray_max(trial, 1.0)
                if tt is not None:
                    cand = tt * trial
                    Tc = m.value(cand)
                    if np.isfinite(Tc) and Tc <= Tu + sp.armijo * a * slope:
                        accepted = (a, cand, Tc)
                        break
                a *= 0.5
            if accepted is None:
                messages.append(f"phase 2 line search stalled at iteration {it}")
                break
            prev = (u, g)
            alpha, u, Tu = accepted
            if m.norm(u) < 1e-12:
                raise DegeneratePathError("iterate collapsed onto the origin")
    iterations = it + 1
    u_star = GridFunction(prob.grid, u)
    level = m.value(u)
    res = weak_residual(u_star, prob)
    nLG = luxemburg_norm(u_star, prob.Y, "LG", sp.bisection_tol)
    J, I, Fs = m.terms(u)
    if not converged:
        messages.append(f"iteration cap reached with gradient norm {gnorm:.3e}")
    rep = SolveReport(
        u_star=u_star, level_c=level, residual=res, geometry=geometry, trace=trace,
        converged=converged, nontrivial=bool(nLG > 10.0 * sp.tol_grad),
        radial=prob.grid.kind == "radial", grad_norm=gnorm, iterations=iterations,
        norm_LG=nLG, iterates=iterates, messages=messages,
        terms={"J": J, "I": I, "F": Fs},
    )
    if converged and level < geometry.delta_rho - 1e-6:
        rep.messages.append("level below delta_rho: path did not cross the ridge")
    return rep


# ------------------------------------------------------------- monitoring


def ps_monitor(report: SolveReport, prob: ProblemSpec, slack: float = 1e-8) -> dict:
    """Check ``T(u) - <T'(u), u>/theta >= (theta - p+)/theta (J + I) - slack`` on iterates."""
    m = _model(prob)
    theta = prob.nl.theta
    pplus = _young.indices(prob.Y).p_plus
    rows, norms = [], []
    for u in report.iterates + [report.u_star.values]:
        J, I, Fs = m.terms(u)
        lhs = J + I - Fs - float(np.dot(m.euclid(u), u)) / theta
        rhs = (theta - pplus) / theta * (J + I)
        rows.append({"lhs": lhs, "rhs": rhs, "ok": bool(lhs >= rhs - slack)})
        norms.append(m.norm(u))
    return {"ok": all(r["ok"] for r in rows), "rows": rows,
            "sup_norm": float(max(norms)) if norms else 0.0}


def szulkin_check(u: GridFunction, prob: ProblemSpec, n: int = 100, *, seed: int = 0,
                  scale: float = 0.1, slack: float = 1e-6) -> dict:
    """Check ``Phi(v) - Phi(u) >= int f(u)(v - u)`` for random ``v`` near ``u``.

    ``Phi = J + I``; ``v = u + scale * max|u| * xi`` with smooth random ``xi``.
    """
    m = _model(prob)
    rng = np.random.default_rng(seed)
    uv = u.values
    J, I, _ = m.terms(uv)
    Phi_u = J + I
    fu = prob.nl.f(uv)
    amp = scale * max(float(np.max(np.abs(uv))), 1e-12)
    worst = np.inf
    for xi in random_directions(prob.grid, n, rng):
        xi = xi / max(float(np.max(np.abs(xi))), 1e-300)
        v = uv + amp * xi
        Jv, Iv, _ = m.terms(v)
        gap = (Jv + Iv - Phi_u) - float(np.dot(m.w, fu * (v - uv)))
        worst = min(worst, gap)
    return {"ok": bool(worst >= -slack), "min_gap": float(worst), "draws": n}


def radialize(u: GridFunction) -> GridFunction:
    """Symmetrize: radial grids are returned unchanged, symmetric 1-D grids
    are mapped to the even part of ``u``."""
    g = u.grid
    if g.kind == "radial":
        return u
    if g.kind != "interval" or not np.allclose(g.nodes, -g.nodes[::-1], atol=1e-12):
        raise ValueError("radialize needs a radial grid or a symmetric interval")
    return GridFunction(g, 0.5 * (u.values + u.values[::-1]))
