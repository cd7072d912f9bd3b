"""End-to-end acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line (visible with ``-s`` or in
the captured output of a failure) and enforces its runtime budget.
"""

import time

import numpy as np
import pytest

from fracorlicz import diagnostics as D
from fracorlicz import space
from fracorlicz import variational as V
from fracorlicz import young
from fracorlicz.checks import gateaux_suite, sandwich_suite, young_suite
from fracorlicz.problem import ProblemSpec, power_nonlinearity


# collected lines are repeated in the terminal summary (see conftest.py)
RESULTS: dict = {}


def report(k, ok, detail, elapsed, budget):
    ok = bool(ok and elapsed < budget)
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail} ({elapsed:.1f}s / {budget:g}s)"
    RESULTS[k] = line
    print("\n" + line)
    return ok


def test_criterion_1_young_suite():
    t0 = time.perf_counter()
    families = [young.power(p) for p in (1.5, 2.0, 3.0)] + [young.lloglt()]
    results = {Y.label: young_suite(Y, n=1000, seed=1) for Y in families}
    failed = [f"{lab}:{name}" for lab, res in results.items()
              for name, r in res.items() if not r["ok"]]
    assert report(1, not failed, f"failures={failed}", time.perf_counter() - t0, 10)


def test_criterion_2_sobolev_slope():
    t0 = time.perf_counter()
    Gs = young.sobolev_conjugate(young.power(2.0, 1.0), 3, 0.5)
    t = np.geomspace(10, 1e4, 50)
    slope = np.polyfit(np.log(t), np.log(Gs.G(t)), 1)[0]
    assert report(2, abs(slope - 3.0) <= 0.05, f"slope={slope:.4f}",
                  time.perf_counter() - t0, 5)


def test_criterion_3_sandwich():
    t0 = time.perf_counter()
    grids = [space.interval_grid(-1, 1, 40, 0.3), space.radial_grid(3, 0.5, 40, 10.0)]
    failed = []
    for Y in (young.power(1.5), young.power(2.0), young.power(3.0), young.lloglt()):
        for g in grids:
            res = sandwich_suite(Y, g, n=100, seed=2)["sandwich"]
            if not res["ok"]:
                failed.append((Y.label, g.kind, res["failures"]))
    assert report(3, not failed, f"failures={failed}", time.perf_counter() - t0, 30)


def test_criterion_4_gateaux():
    # the second-order difference ratio needs G(|t|) in C^3: t^2/2 and t^4/4
    t0 = time.perf_counter()
    g = space.interval_grid(-1, 1, 30, 0.5)
    lo, hi, pair = np.inf, -np.inf, 0.0
    ok = True
    for Y in (young.power(2.0, 0.5), young.power(4.0, 0.25)):
        res = gateaux_suite(ProblemSpec(Y, g, power_nonlinearity(4.5)), n=50, seed=3)
        lo, hi = min(lo, res["fd_ratio"]["min"]), max(hi, res["fd_ratio"]["max"])
        pair = max(pair, 1e-10 - res["gradient_pairing"]["worst"])
        ok = ok and res["fd_ratio"]["ok"] and res["gradient_pairing"]["ok"]
    assert report(4, ok, f"ratio in [{lo:.3f}, {hi:.3f}], pairing err={pair:.2e}",
                  time.perf_counter() - t0, 30)


def test_criterion_5_quadrature_refinement():
    t0 = time.perf_counter()
    Y = young.power(2.0, 0.5)
    vals = [space.modular_sG(space.interval_grid(-1, 1, M, 0.5).sample(
        lambda x: np.exp(-4 * x ** 2) * np.cos(2 * x)), Y) for M in (100, 200, 400, 800)]
    d = np.abs(np.diff(vals))
    gap = d[-1] / abs(vals[-1])
    ok = bool(d[0] > d[1] > d[2] and gap < 0.02)
    assert report(5, ok, f"diffs={np.array2string(d, precision=3)}, gap={gap:.3%}",
                  time.perf_counter() - t0, 60)


def _benchmark(M):
    g = space.radial_grid(3, 0.5, M, 20.0)
    prob = ProblemSpec(young.power(2.0, 0.5), g, power_nonlinearity(2.5))
    return prob, V.solve_mountain_pass(prob)


def test_criterion_6_benchmark():
    t0 = time.perf_counter()
    prob, rep = _benchmark(400)
    prob8, rep8 = _benchmark(800)
    coarse = prob8.grid.function(np.interp(prob8.grid.nodes, prob.grid.nodes, rep.u_star.values))
    rel = (space.luxemburg_norm(coarse - rep8.u_star, prob8.Y)
           / space.luxemburg_norm(rep8.u_star, prob8.Y))
    ok = (rep.converged and rep.residual < 1e-3 and rep.level_c > 0 and rep.norm_LG > 1e-2
          and rep8.converged and rel < 0.03)
    assert report(6, ok, f"residual={rep.residual:.2e}, c={rep.level_c:.6g}, "
                  f"|u|_LG={rep.norm_LG:.4g}, M400 vs M800={rel:.3%}",
                  time.perf_counter() - t0, 600)


def test_criterion_7_lloglt():
    # p+ = 2 exceeds the critical exponent 1.2 of p- = 1, so q = 1.15 cannot
    # satisfy the growth window: the conditions must fail loudly
    t0 = time.perf_counter()
    g = space.radial_grid(3, 0.5, 100, 20.0)
    infeasible = ProblemSpec(young.lloglt(), g, power_nonlinearity(1.15))
    conds = V.check_f_conditions(infeasible.nl, infeasible.Y, infeasible.grid)
    with pytest.raises(V.ConditionsError):
        V.solve_mountain_pass(infeasible)
    diagnosed = not conds.ok and "m1" in conds.failures()
    # a feasible exponent on the same family must solve and satisfy Szulkin
    feasible = ProblemSpec(young.lloglt(), g, power_nonlinearity(2.5))
    rep = V.solve_mountain_pass(feasible, enforce_conditions=False)
    sz = V.szulkin_check(rep.u_star, feasible, n=100, slack=1e-6)
    ok = diagnosed and rep.converged and rep.residual < 1e-2 and sz["ok"]
    assert report(7, ok, f"q=1.15 failures={conds.failures()}; q=2.5 residual="
                  f"{rep.residual:.2e}, Szulkin ok={sz['ok']}", time.perf_counter() - t0, 600)


def test_criterion_8_lions():
    t0 = time.perf_counter()
    T2, Psi = young.power(2.0, 1.0), young.power(2.5, 1.0)
    van = D.lions_vanishing_test(D.SequenceFamily("vanish", D.smooth_bump, n_max=12), Psi, 1.0,
                                 Y=T2)
    tr = D.lions_vanishing_test(D.SequenceFamily("translate", D.smooth_bump, n_max=12), Psi, 1.0,
                                Y=T2)
    ok = (van["triggered"] and van["Q_decreasing"] and van["Psi_decreasing"]
          and van["Psi_final_ratio"] < 1e-3 and tr["Q_spread"] < 0.02)
    assert report(8, ok, f"vanish Psi ratio={van['Psi_final_ratio']:.2e}, "
                  f"translate Q spread={tr['Q_spread']:.2e}", time.perf_counter() - t0, 120)


def test_criterion_9_lieb():
    t0 = time.perf_counter()
    T2 = young.power(2.0, 1.0)
    fam = D.SequenceFamily("translate", D.smooth_bump, n_max=8, margin=2.0)
    bump = lambda x, y, z: D.smooth_bump(np.sqrt(x * x + y * y + z * z))  # noqa: E731
    errs, masses, ok = [], [], True
    for n, u in fam.members():
        res = D.lieb_recenter(u, 0.5, 0.01, T2)
        v = res.recentered
        # the shift is exact, so the centred bump must reappear on the same box
        errs.append(float(np.max(np.abs(v.values - v.grid.sample(bump).values))))
        masses.append(res.cube_mass)
        ok = ok and res.y0 == (n, 0, 0) and res.ok
    c5 = min(masses)
    ok = ok and max(errs) < 1e-8 and c5 > 0
    assert report(9, ok, f"max recentring error={max(errs):.1e}, c5={c5:.4g}",
                  time.perf_counter() - t0, 60)


def test_criterion_10_strauss():
    t0 = time.perf_counter()
    g = space.radial_grid(3, 0.5, 4000, 1e4, "geometric:1.002")
    u = g.sample(lambda r: (1.0 + r) ** -2.0)
    rep = D.strauss_decay_test(u, 1.0, young.power(2.0, 1.0), radii=(2, 4, 8, 16), slack=0.05)
    worst = max(row["ball"] / row["bound"] for row in rep["rows"])
    assert report(10, rep["ok"], f"worst ball/bound={worst:.3f}, gammas="
                  f"{[row['gamma'] for row in rep['rows']]}", time.perf_counter() - t0, 60)
