"""Problem data: the reaction term and a full problem instance."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import young as _young
from .space import Grid, grid_from_config
from .young import SpecError, YoungFunction

__all__ = ["Nonlinearity", "SolverParams", "ProblemSpec", "power_nonlinearity",
           "zero_nonlinearity", "table_nonlinearity", "nonlinearity_from_config",
           "problem_from_config"]


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Reaction term ``f`` with primitive ``F`` and comparison function ``M``."""

    f: Callable
    F: Callable
    theta: float
    M_fn: YoungFunction | None
    label: str = "custom"
    q: float | None = None
    odd_extension: bool = True
    meta: dict = field(default_factory=dict)

    def df(self, t):
        """Derivative of ``f`` (closed form for powers, else central differences)."""
        t = np.asarray(t, dtype=float)
        if self.q is not None:
            return (self.q - 1.0) * np.abs(t) ** (self.q - 2.0)
        h = 1e-6 * np.maximum(1.0, np.abs(t))
        return (self.f(t + h) - self.f(t - h)) / (2.0 * h)


def power_nonlinearity(q: float, theta: float | None = None) -> Nonlinearity:
    """``f(t) = |t|^{q-2} t`` (odd), ``F = |t|^q / q``, ``M(t) = t^q / q``."""
    q = float(q)
    if q <= 1.0:
        raise SpecError("power nonlinearity needs q > 1")
    return Nonlinearity(
        f=lambda t: np.sign(t) * np.abs(t) ** (q - 1.0),
        F=lambda t: np.abs(t) ** q / q,
        theta=q if theta is None else float(theta),
        M_fn=_young.power(q),
        label=f"|t|^{q - 2:g} t",
        q=q,
    )


def zero_nonlinearity() -> Nonlinearity:
    return Nonlinearity(f=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
                        F=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
                        theta=np.inf, M_fn=None, label="0")


def table_nonlinearity(path, theta: float, M_fn: YoungFunction | None = None) -> Nonlinearity:
    """``f`` from a two-column CSV ``(t, f(t))`` that must cover both signs of ``t``."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except (ValueError, IndexError):
                continue
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 3:
        raise SpecError(f"malformed nonlinearity table {path}")
    t, fv = arr[:, 0], arr[:, 1]
    if np.any(np.diff(t) <= 0):
        raise SpecError("nonlinearity table abscissae must be strictly increasing")
    if not (t[0] < 0 < t[-1]):
        raise SpecError("nonlinearity table must cover negative and positive t")
    f0 = np.interp(0.0, t, fv)
    if abs(f0) > 1e-12:
        raise SpecError("nonlinearity table must satisfy f(0) = 0")
    tt = np.sort(np.concatenate([t, [0.0]]))
    ff = np.interp(tt, t, fv)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (ff[1:] + ff[:-1]) * np.diff(tt))])
    cum -= np.interp(0.0, tt, cum)

    def f(x):
        return np.interp(np.asarray(x, dtype=float), tt, ff)

    def F(x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, tt[0], tt[-1])
        k = np.clip(np.searchsorted(tt, xc, side="right") - 1, 0, len(tt) - 2)
        dx = xc - tt[k]
        slope = (ff[k + 1] - ff[k]) / (tt[k + 1] - tt[k])
        return cum[k] + ff[k] * dx + 0.5 * slope * dx * dx

    return Nonlinearity(f=f, F=F, theta=float(theta), M_fn=M_fn, label=f"table:{path}",
                        odd_extension=False, meta={"range": (float(t[0]), float(t[-1]))})


def nonlinearity_from_config(cfg: dict) -> Nonlinearity:
    fam = str(cfg.get("family", "power:q=2")).strip()
    name, _, rest = fam.partition(":")
    theta = cfg.get("theta")
    if name == "power":
        params = _young._parse_params(rest)
        if "q" not in params:
            raise SpecError("power nonlinearity needs q")
        return power_nonlinearity(params["q"], theta)
    if name == "zero":
        return zero_nonlinearity()
    if name == "table":
        if theta is None:
            raise SpecError("table nonlinearity needs theta")
        M_fn = _young.from_spec(cfg["M"]) if "M" in cfg else None
        return table_nonlinearity(rest, float(theta), M_fn)
    raise SpecError(f"unknown nonlinearity family {fam!r}")


@dataclass(frozen=True)
class SolverParams:
    K: int = 20
    tol_grad: float = 1e-6
    max_iter: int = 50_000
    reequidistribute_every: int = 10
    armijo: float = 1e-4
    max_halvings: int = 40
    bisection_tol: float = 1e-10
    path_phase_iters: int = 200
    geometry_directions: int = 16
    rho_start: float = 0.5
    rho_min: float = 1e-6
    t0_max: float = 1e6
    trace_every: int = 1
    store_iterates_every: int = 10
    seed: int = 0

    @classmethod
    def from_config(cls, cfg: dict | None) -> "SolverParams":
        cfg = dict(cfg or {})
        known = {k: cfg.pop(k) for k in list(cfg) if k in cls.__dataclass_fields__}
        if cfg:
            raise SpecError(f"unknown solver keys {sorted(cfg)}")
        return cls(**known)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """One instance of ``(-Delta_g)^s u + g(|u|) u/|u| = f(u)`` on a grid."""

    Y: YoungFunction
    grid: Grid
    nl: Nonlinearity
    solver: SolverParams = SolverParams()
    config: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.grid.N

    @property
    def s(self) -> float:
        return self.grid.s


def problem_from_config(cfg: dict) -> ProblemSpec:
    """Resolve a problem block ``{young, s, N, grid, nonlinearity, solver}``."""
    try:
        Y = _young.from_spec(cfg["young"])
        N = int(cfg.get("N", cfg.get("grid", {}).get("N", 3)))
        s = float(cfg.get("s", cfg.get("grid", {}).get("s", 0.5)))
        grid_cfg = dict(cfg["grid"])
        grid_cfg.setdefault("N", N)
        grid_cfg.setdefault("s", s)
        grid = grid_from_config(grid_cfg)
        nl = nonlinearity_from_config(cfg.get("nonlinearity", {}))
        solver = SolverParams.from_config(cfg.get("solver"))
    except KeyError as exc:
        raise SpecError(f"missing config key {exc}") from None
    return ProblemSpec(Y, grid, nl, solver, config=dict(cfg))
