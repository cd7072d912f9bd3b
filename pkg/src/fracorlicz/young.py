"""Young-function calculus.

A Young function is stored through its density ``g`` (right-continuous,
non-decreasing, ``g(0) = 0``) and, when known, its primitive
``G(t) = int_0^t g``.  Everything else -- inverses, the complementary
function, the Sobolev conjugate, growth indices and the structural
predicates -- is derived numerically from these two callables.

Predicates never claim anything "for all t": they sample a finite window and
return the witnessing extremal sample together with the boolean.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from ._numerics import bisect_increasing, gauss_legendre, log_grid

__all__ = [
    "Family",
    "YoungFunction",
    "OrliczIndices",
    "Delta2Check",
    "G2Check",
    "power",
    "powerlog",
    "lloglt",
    "exponential",
    "from_table",
    "from_spec",
    "eval_G",
    "inverse_G",
    "estimate_indices",
    "complement",
    "sobolev_conjugate",
    "sobolev_exponent",
    "check_delta2",
    "check_G2",
    "essentially_stronger",
    "young_gap",
    "PreconditionError",
    "SpecError",
]

QUAD_RTOL = 1e-10
DEFAULT_WINDOW = (1e-6, 1e6)
DEFAULT_SAMPLES = 10_000


class PreconditionError(ValueError):
    """An operation was called outside the region where it is defined."""


class SpecError(ValueError):
    """A family specification string or table could not be parsed."""


class Family(str, enum.Enum):
    POWER = "power"
    POWER_LOG = "power-log"
    L_LOG_L = "L-log-L"
    TABLE = "table"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class YoungFunction:
    """A Young function given by its density.

    Parameters
    ----------
    density
        Vectorized callable ``t -> g(t)`` on ``t >= 0``.
    primitive
        Optional vectorized callable ``t -> G(t)``.  When absent ``G`` is
        obtained by adaptive quadrature of the density.
    family
        Reporting tag.
    homogeneity
        ``p`` when ``G(t) = c t**p`` exactly; enables scaling shortcuts in
        the pair quadrature.
    """

    density: Callable
    primitive: Callable | None = None
    family: Family = Family.CUSTOM
    label: str = "custom"
    homogeneity: float | None = None
    meta: dict = field(default_factory=dict)

    def g(self, t):
        t = np.asarray(t, dtype=float)
        return np.asarray(self.density(t), dtype=float)

    def G(self, t):
        t = np.asarray(t, dtype=float)
        if self.primitive is not None:
            return np.asarray(self.primitive(t), dtype=float)
        return _quad_primitive(self.density, t)

    def __call__(self, t):
        return self.G(t)

    def __repr__(self):
        return f"YoungFunction({self.label!r})"


def _quad_primitive(density, t):
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape)
    for k, tk in np.ndenumerate(t):
        if tk == 0.0:
            out[k] = 0.0
            continue
        val, _ = integrate.quad(lambda x: float(density(np.asarray(x))), 0.0, tk,
                                epsrel=QUAD_RTOL, epsabs=0.0, limit=200)
        out[k] = val
    return out


# ---------------------------------------------------------------- families


def power(p: float, c: float | None = None) -> YoungFunction:
    """``G(t) = c t**p`` with ``c = 1/p`` by default (so ``g(t) = t**(p-1)``)."""
    p = float(p)
    if not p > 1.0:
        raise SpecError(f"power family needs p > 1, got {p}")
    c = 1.0 / p if c is None else float(c)
    label = f"t^{p:g}/{p:g}" if c == 1.0 / p else f"{c:g}*t^{p:g}"
    return YoungFunction(
        density=lambda t: c * p * t ** (p - 1.0),
        primitive=lambda t: c * t ** p,
        family=Family.POWER,
        label=label,
        homogeneity=p,
        meta={"p": p, "c": c},
    )


def powerlog(p: float) -> YoungFunction:
    """``G(t) = t**p log(1 + t)``."""
    p = float(p)
    if p < 1.0:
        raise SpecError(f"powerlog family needs p >= 1, got {p}")

    def dens(t):
        return p * t ** (p - 1.0) * np.log1p(t) + t ** p / (1.0 + t)

    fam = Family.L_LOG_L if p == 1.0 else Family.POWER_LOG
    return YoungFunction(
        density=dens,
        primitive=lambda t: t ** p * np.log1p(t),
        family=fam,
        label="t*log(1+t)" if p == 1.0 else f"t^{p:g}*log(1+t)",
        meta={"p": p},
    )


def lloglt() -> YoungFunction:
    """``G(t) = t log(1 + t)``: ``p- = 1`` at infinity, ``p+ = 2`` at zero."""
    return powerlog(1.0)


def exponential() -> YoungFunction:
    """``G(t) = e**t - t - 1``; fails the Delta-2 condition."""
    return YoungFunction(
        density=lambda t: np.expm1(t),
        primitive=lambda t: np.expm1(t) - t,
        family=Family.CUSTOM,
        label="exp(t)-t-1",
    )


def from_table(source) -> YoungFunction:
    """Density from a two-column table ``(t, g(t))``.

    ``source`` is a CSV path or an ``(n, 2)`` array.  The density is the
    piecewise-linear interpolant, continued linearly past the last row; the
    primitive is its exact integral.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        rows = []
        with open(source, newline="") as fh:
            for rec in csv.reader(fh):
                if not rec or rec[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(rec[0]), float(rec[1])])
                except (ValueError, IndexError):
                    if rows:
                        raise SpecError(f"malformed table row {rec!r}") from None
        arr = np.asarray(rows, dtype=float)
        label = f"table:{source}"
    else:
        arr = np.asarray(source, dtype=float)
        label = "table"
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise SpecError("table needs at least two (t, g) rows")
    t, gv = arr[:, 0], arr[:, 1]
    if not np.all(np.isfinite(arr)):
        raise SpecError("table contains non-finite entries")
    if np.any(np.diff(t) <= 0):
        raise SpecError("table abscissae must be strictly increasing")
    if t[0] < 0:
        raise SpecError("table abscissae must be non-negative")
    if t[0] > 0:
        t = np.concatenate([[0.0], t])
        gv = np.concatenate([[0.0], gv])
    if gv[0] != 0.0 or np.any(gv[1:] <= 0) or np.any(np.diff(gv) < 0):
        raise SpecError("table density must satisfy g(0)=0, g>0 and be non-decreasing")
    slope_end = (gv[-1] - gv[-2]) / (t[-1] - t[-2])
    # cumulative exact integral of the linear interpolant
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (gv[1:] + gv[:-1]) * np.diff(t))])

    def dens(x):
        x = np.asarray(x, dtype=float)
        inside = np.interp(x, t, gv)
        return np.where(x > t[-1], gv[-1] + slope_end * (x - t[-1]), inside)

    def prim(x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, 0.0, t[-1])
        k = np.clip(np.searchsorted(t, xc, side="right") - 1, 0, len(t) - 2)
        dx = xc - t[k]
        slope = (gv[k + 1] - gv[k]) / (t[k + 1] - t[k])
        inner = cum[k] + gv[k] * dx + 0.5 * slope * dx * dx
        ex = np.maximum(x - t[-1], 0.0)
        return inner + gv[-1] * ex + 0.5 * slope_end * ex * ex

    return YoungFunction(density=dens, primitive=prim, family=Family.TABLE,
                         label=label, meta={"rows": len(t)})


def _parse_params(text: str) -> dict:
    out = {}
    if not text:
        return out
    for item in text.split(","):
        if "=" not in item:
            raise SpecError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise SpecError(f"non-numeric parameter {item!r}") from None
    return out


def from_spec(spec: str) -> YoungFunction:
    """Parse ``"power:p=2"``, ``"powerlog:p=2"``, ``"lloglt"``, ``"exp"`` or
    ``"table:<path>"``."""
    spec = spec.strip()
    name, _, rest = spec.partition(":")
    name = name.strip().lower()
    if name == "table":
        if not rest:
            raise SpecError("table spec needs a path")
        return from_table(rest)
    params = _parse_params(rest)
    if name == "power":
        if "p" not in params:
            raise SpecError("power spec needs p")
        return power(params["p"], params.get("c"))
    if name == "powerlog":
        return powerlog(params.get("p", 1.0))
    if name == "lloglt":
        return lloglt()
    if name == "exp":
        return exponential()
    raise SpecError(f"unknown Young family {spec!r}")


# ------------------------------------------------------------- evaluation


def eval_G(Y: YoungFunction, t):
    """``G(t)`` for ``t >= 0``; raises on negative input."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValueError("eval_G needs finite t >= 0")
    out = Y.G(t)
    return float(out) if out.ndim == 0 else out


def inverse_G(Y: YoungFunction, y):
    """``G^{-1}(y)`` by bisection on the strictly increasing ``G``."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ValueError("inverse_G needs finite y >= 0")
    lo, hi, _ = bisect_increasing(Y.G, y)
    err_lo = np.abs(Y.G(lo) - y)
    err_hi = np.abs(Y.G(hi) - y)
    out = np.where(err_hi < err_lo, hi, lo)
    out = np.where(y == 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


class OrliczIndices(NamedTuple):
    p_minus: float
    p_plus: float
    attained_at: tuple


def estimate_indices(Y: YoungFunction, t_lo: float = DEFAULT_WINDOW[0],
                     t_hi: float = DEFAULT_WINDOW[1],
                     samples: int = DEFAULT_SAMPLES) -> OrliczIndices:
    """inf / sup of ``t g(t) / G(t)`` over a log-uniform sample.

    The sampled infimum over-approximates ``p-`` and the supremum
    under-approximates ``p+``.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    t = log_grid(t_lo, t_hi, samples)
    Gt = Y.G(t)
    ok = Gt > 0
    if not ok.any():
        raise ArithmeticError("G vanishes numerically on the whole window")
    t, ratio = t[ok], t[ok] * Y.g(t[ok]) / Gt[ok]
    i_min, i_max = int(np.argmin(ratio)), int(np.argmax(ratio))
    return OrliczIndices(float(ratio[i_min]), float(ratio[i_max]),
                         (float(t[i_min]), float(t[i_max])))


def indices(Y: YoungFunction) -> OrliczIndices:
    """Exact indices for power families, sampled otherwise (cached)."""
    cached = Y.meta.get("_indices")
    if cached is not None:
        return cached
    if Y.homogeneity is not None:
        p = Y.homogeneity
        out = OrliczIndices(p, p, (1.0, 1.0))
    else:
        out = estimate_indices(Y)
    Y.meta["_indices"] = out
    return out


# ------------------------------------------------------------ complement


def generalized_inverse(density, y, ceiling=1e12):
    """``sup{s : g(s) <= y}`` by bisection; returns ``(values, saturated)``."""
    y = np.asarray(y, dtype=float)
    lo, hi, sat = bisect_increasing(density, y, ceiling=ceiling)
    return 0.5 * (lo + hi), sat


def complement(Y: YoungFunction, ceiling: float = 1e12) -> YoungFunction:
    """The complementary function ``G~(t) = sup_w (t w - G(w))``.

    Built from the generalized inverse density ``g~``.  The primitive uses
    the equality case of Young's inequality, ``G~(t) = t g~(t) - G(g~(t))``,
    which holds for continuous ``g``.  Evaluations where the bracket for
    ``g~`` hit ``ceiling`` are reported by :func:`complement_saturated`.
    """

    def dens(t):
        return generalized_inverse(Y.g, t, ceiling)[0]

    def prim(t):
        t = np.asarray(t, dtype=float)
        w = dens(t)
        return np.maximum(t * w - Y.G(w), 0.0)

    hom = None
    if Y.homogeneity is not None:
        hom = Y.homogeneity / (Y.homogeneity - 1.0)
    return YoungFunction(density=dens, primitive=prim, family=Y.family,
                         label=f"complement({Y.label})", homogeneity=hom,
                         meta={"ceiling": ceiling, "of": Y})


def complement_saturated(Yc: YoungFunction, t) -> np.ndarray:
    """Mask of arguments where the complement search hit its ceiling."""
    base = Yc.meta.get("of")
    if base is None:
        raise ValueError("not a complement")
    return generalized_inverse(base.g, t, Yc.meta["ceiling"])[1]


def legendre_oracle(Y: YoungFunction, t: float, w_max: float = 1e3) -> float:
    """Direct maximization of ``t w - G(w)``; slow reference only."""
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(lambda w: -(t * w - float(Y.G(np.asarray(w)))),
                          bounds=(0.0, w_max), method="bounded",
                          options={"xatol": 1e-13})
    return float(-res.fun)


def young_gap(Y: YoungFunction, a, b, Yc: YoungFunction | None = None):
    """``G(a) + G~(b) - a b``; non-negative up to rounding."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("young_gap needs a, b >= 0")
    Yc = complement(Y) if Yc is None else Yc
    out = Y.G(a) + Yc.G(b) - a * b
    return float(out) if np.ndim(out) == 0 else out


# ------------------------------------------------------- Sobolev conjugate


def sobolev_exponent(p: float, N: int, s: float) -> float:
    """``N p / (N - s p)``; raises when ``N <= s p``."""
    if N - s * p <= 0:
        raise PreconditionError(
            f"Sobolev window undefined: N - s*p = {N - s * p:g} <= 0 "
            f"(N={N}, s={s:g}, p={p:g})")
    return N * p / (N - s * p)


def sobolev_conjugate(Y: YoungFunction, N: int, s: float, *,
                      nodes: int = 2048, log10_range=(-30.0, 30.0),
                      gl_points: int = 8) -> YoungFunction:
    """Sobolev conjugate ``G_*`` with ``G_*^{-1}(t) = int_0^t G^{-1}(r) r^{-(N+s)/N} dr``.

    The integral is taken in the variable ``log r`` (Gauss-Legendre per
    table cell) with a power-law head on ``(0, r_0]``.  ``G_*`` is the
    monotone-cubic interpolant of ``log G_*`` against ``log x`` and is
    continued past the table by its end log-log slopes.
    """
    if N < 1 or not (0.0 < s < 1.0):
        raise ValueError("need N >= 1 and 0 < s < 1")
    ell = np.linspace(log10_range[0], log10_range[1], nodes) * math.log(10.0)
    expo = s / N

    def h(lv):
        tau = np.exp(lv)
        return np.asarray(inverse_G(Y, tau)) * np.exp(-expo * lv)

    x_gl, w_gl = gauss_legendre(gl_points, ell[:-1], ell[1:])
    cells = np.sum(h(x_gl.ravel()).reshape(x_gl.shape) * w_gl, axis=1)
    h_ends = h(ell[:2])
    alpha = math.log(h_ends[1] / h_ends[0]) / (ell[1] - ell[0])
    if not alpha > 1e-3:
        raise PreconditionError(
            "Sobolev conjugate undefined: int_0^1 G^{-1}(t) t^{-(N+s)/N} dt "
            f"diverges (local exponent {alpha:.4g} <= 0 near t=0)")
    head = h_ends[0] / alpha
    x = head + np.concatenate([[0.0], np.cumsum(cells)])
    y = np.exp(ell)
    lx, ly = np.log(x), ell
    interp = PchipInterpolator(lx, ly, extrapolate=False)
    dinterp = interp.derivative()
    slope_lo = (ly[1] - ly[0]) / (lx[1] - lx[0])
    slope_hi = (ly[-1] - ly[-2]) / (lx[-1] - lx[-2])

    def _logG(lxv):
        out = interp(np.clip(lxv, lx[0], lx[-1]))
        out = np.where(lxv < lx[0], ly[0] + slope_lo * (lxv - lx[0]), out)
        return np.where(lxv > lx[-1], ly[-1] + slope_hi * (lxv - lx[-1]), out)

    def _slope(lxv):
        out = dinterp(np.clip(lxv, lx[0], lx[-1]))
        out = np.where(lxv < lx[0], slope_lo, out)
        return np.where(lxv > lx[-1], slope_hi, out)

    def prim(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            lt = np.log(np.where(t > 0, t, 1.0))
        return np.where(t > 0, np.exp(_logG(lt)), 0.0)

    def dens(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            lt = np.log(np.where(t > 0, t, 1.0))
        val = np.exp(_logG(lt)) * _slope(lt) / np.where(t > 0, t, 1.0)
        return np.where(t > 0, val, 0.0)

    return YoungFunction(
        density=dens, primitive=prim, family=Family.TABLE,
        label=f"sobolev_conjugate({Y.label}, N={N}, s={s:g})",
        meta={"x_table": x, "y_table": y, "extrapolation_slopes": (slope_lo, slope_hi),
              "table_range": (float(x[0]), float(x[-1])), "head_exponent": alpha},
    )


def conjugate_inverse_oracle(Y: YoungFunction, N: int, s: float, t: float) -> float:
    """``G_*^{-1}(t)`` by scipy quadrature in ``r = u**(N/s)`` (reference)."""
    k = N / s

    def integrand(u):
        if u == 0.0:
            return 0.0
        return float(inverse_G(Y, u ** k)) * k * u ** (-2.0)

    val, _ = integrate.quad(integrand, 0.0, t ** (1.0 / k), epsrel=1e-11, limit=400)
    return val


# -------------------------------------------------------------- predicates


class Delta2Check(NamedTuple):
    bounded: bool
    sup_ratio: float
    witness: float


class G2Check(NamedTuple):
    convex: bool
    min_second_difference: float
    witness: float


def check_delta2(Y: YoungFunction, t_lo: float, t_hi: float, *,
                 samples: int = 2000, cap: float = 1e3) -> Delta2Check:
    """Sampled ``sup G(2t)/G(t)`` and whether it stays below ``cap``."""
    t = log_grid(t_lo, t_hi, samples)
    Gt = Y.G(t)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ratio = Y.G(2.0 * t) / Gt
    ratio = np.where(np.isfinite(ratio) & (Gt > 0), ratio, np.inf)
    k = int(np.argmax(ratio))
    sup = float(ratio[k])
    return Delta2Check(bool(np.isfinite(sup) and sup <= cap), sup, float(t[k]))


def check_G2(Y: YoungFunction, t_lo: float, t_hi: float, *,
             samples: int = 2001, tol: float = 1e-10) -> G2Check:
    """Second differences of ``t -> G(sqrt(t))`` on a uniform grid."""
    if not (0 <= t_lo < t_hi):
        raise ValueError("need 0 <= t_lo < t_hi")
    t = np.linspace(t_lo, t_hi, samples)
    v = Y.G(np.sqrt(t))
    d2 = v[2:] - 2.0 * v[1:-1] + v[:-2]
    scale = max(1.0, float(np.max(np.abs(v))))
    k = int(np.argmin(d2))
    return G2Check(bool(d2[k] >= -tol * scale), float(d2[k]), float(t[k + 1]))


def essentially_stronger(A: YoungFunction, B: YoungFunction, lambdas=(0.5, 1.0, 2.0),
                         T: float = 1e6, *, threshold: float | None = None,
                         samples: int = 64) -> bool:
    """Finite surrogate for ``A << B`` (``A(lt)/B(t) -> 0`` for every ``l``).

    For each ``l`` the ratio is sampled over the last decade ``[T/10, T]``
    and must be strictly decreasing there.  With ``threshold`` set, the
    ratio at ``T`` must additionally fall below it.
    """
    lambdas = list(lambdas)
    if not lambdas or min(lambdas) <= 0:
        raise ValueError("lambdas must be a non-empty list of positive reals")
    t = np.geomspace(T / 10.0, T, samples)
    Bt = B.G(t)
    for lam in lambdas:
        ratio = A.G(lam * t) / Bt
        if not np.all(np.isfinite(ratio)):
            return False
        if np.any(np.diff(ratio) >= 0):
            return False
        if threshold is not None and ratio[-1] >= threshold:
            return False
    return True
