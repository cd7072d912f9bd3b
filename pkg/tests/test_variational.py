import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracorlicz import space, young
from fracorlicz import variational as V
from fracorlicz.checks import gateaux_suite, smooth_random
from fracorlicz.operator import weak_residual
from fracorlicz.problem import (ProblemSpec, SolverParams, Nonlinearity, power_nonlinearity,
                                zero_nonlinearity)


@pytest.fixture(scope="module")
def bench():
    g = space.radial_grid(3, 0.5, 100, 20.0)
    return ProblemSpec(young.power(2.0, 0.5), g, power_nonlinearity(2.5))


@pytest.fixture(scope="module")
def bench_solution(bench):
    return V.solve_mountain_pass(bench)


class TestEnergy:
    def test_zero(self, bench):
        assert V.energy(bench.grid.zeros(), bench) == 0.0

    def test_decomposition(self, bench, rng):
        u = bench.grid.function(smooth_random(bench.grid, rng))
        t = V.energy_terms(u, bench)
        assert t["J"] == space.modular_sG(u, bench.Y)
        assert t["I"] == space.modular_G(u, bench.Y)
        assert t["T"] == pytest.approx(t["J"] + t["I"] - t["F"], rel=1e-15)
        assert V.energy(u, bench) == pytest.approx(t["T"], rel=1e-15)

    def test_unbounded_below_along_rays(self, bench):
        e = V.mountain_pass_geometry(bench).e
        assert V.energy(8 * e, bench) < V.energy(e, bench) < 0.0

    def test_no_reaction_is_nonnegative(self, rng):
        g = space.radial_grid(3, 0.5, 40, 10.0)
        prob = ProblemSpec(young.lloglt(), g, zero_nonlinearity())
        for _ in range(10):
            assert V.energy(g.function(smooth_random(g, rng)), prob) >= 0.0

    def test_nonfinite_reaction(self):
        g = space.interval_grid(0, 1, 10, 0.5)
        nl = Nonlinearity(f=lambda t: t, F=lambda t: np.where(t > 5, np.inf, t * t / 2),
                          theta=2.0, M_fn=None)
        prob = ProblemSpec(young.power(2.0), g, nl)
        with pytest.raises(ArithmeticError):
            V.energy(g.sample(lambda x: 0 * x + 6.0), prob)

    def test_reflection_invariance(self, rng):
        g = space.interval_grid(-1, 1, 60, 0.5)
        prob = ProblemSpec(young.lloglt(), g, power_nonlinearity(2.5))
        u = g.function(smooth_random(g, rng))
        flipped = g.function(u.values[::-1])
        assert V.energy(flipped, prob) == pytest.approx(V.energy(u, prob), rel=1e-12)


class TestDerivative:
    def test_zero(self, bench, rng):
        v = bench.grid.function(smooth_random(bench.grid, rng))
        assert V.gateaux(bench.grid.zeros(), v, bench) == 0.0
        assert not np.any(V.grad(bench.grid.zeros(), bench).values)

    def test_euler_identity(self, bench, rng):
        u = bench.grid.function(smooth_random(bench.grid, rng))
        t = V.energy_terms(u, bench)
        expect = 2.0 * t["J"] + 2.0 * t["I"] - 2.5 * t["F"]
        assert V.gateaux(u, u, bench) == pytest.approx(expect, rel=1e-10)

    def test_gradient_directions(self, bench, rng):
        u = bench.grid.function(smooth_random(bench.grid, rng))
        g = V.grad(u, bench).values
        for _ in range(20):
            v = bench.grid.function(smooth_random(bench.grid, rng))
            lhs = float(np.dot(bench.grid.cell_weights, g * v.values))
            assert lhs == pytest.approx(V.gateaux(u, v, bench), rel=1e-10, abs=1e-12)

    @pytest.mark.parametrize("Y", [young.power(2.0, 0.5), young.power(4.0)])
    def test_central_difference_order(self, Y):
        g = space.interval_grid(-1, 1, 100, 0.5)
        res = gateaux_suite(ProblemSpec(Y, g, power_nonlinearity(2.5)), n=20)
        assert res["fd_ratio"]["ok"] and res["gradient_pairing"]["ok"]


class TestConditions:
    def test_benchmark(self, bench):
        rep = V.check_f_conditions(bench.nl, bench.Y, bench.grid)
        assert rep.ok
        # the power case is the equality case of the Ambrosetti-Rabinowitz condition
        assert abs(rep.witnesses["f3"]["theta_F_minus_ft"]) < 1e-9

    def test_reaction_equal_to_density(self, bench):
        nl = Nonlinearity(f=lambda t: np.sign(t) * np.abs(t), F=lambda t: t * t / 2, theta=2.5,
                          M_fn=young.power(2.5))
        assert not V.check_f_conditions(nl, bench.Y, bench.grid).f1

    def test_supercritical(self, bench):
        rep = V.check_f_conditions(power_nonlinearity(3.5), bench.Y, bench.grid)
        assert not rep.m1
        assert rep.witnesses["m1"]["p_minus_star"] == pytest.approx(3.0)

    def test_theta_below_upper_index(self, bench):
        rep = V.check_f_conditions(power_nonlinearity(2.5, theta=1.8), bench.Y, bench.grid)
        assert not rep.f3 and "f3" in rep.failures()


class TestGeometry:
    def test_benchmark(self, bench):
        geo = V.mountain_pass_geometry(bench)
        assert 0.0 < geo.rho < 1.0
        assert geo.delta_rho > 0.0 and geo.sphere_min > 0.0
        m = V._model(bench)
        assert m.norm(geo.e.values) > geo.rho
        assert V.energy(geo.e, bench) < 0.0

    def test_no_reaction(self):
        g = space.radial_grid(3, 0.5, 30, 10.0)
        prob = ProblemSpec(young.power(2.0, 0.5), g, zero_nonlinearity())
        with pytest.raises(V.GeometryError):
            V.mountain_pass_geometry(prob, enforce_conditions=False)

    def test_conditions_enforced(self):
        g = space.radial_grid(3, 0.5, 30, 10.0)
        prob = ProblemSpec(young.lloglt(), g, power_nonlinearity(1.15))
        with pytest.raises(V.ConditionsError) as exc:
            V.mountain_pass_geometry(prob)
        assert not exc.value.report.m1


class TestSolver:
    def test_benchmark(self, bench, bench_solution):
        rep = bench_solution
        assert rep.converged and rep.nontrivial and rep.radial
        assert rep.residual < 1e-3
        assert rep.level_c > 0.0
        assert rep.norm_LG > 1e-2
        assert rep.level_c >= rep.geometry.delta_rho - 1e-6
        assert rep.residual == pytest.approx(weak_residual(rep.u_star, bench), rel=1e-12)

    def test_nehari_identity(self, bench, bench_solution):
        u = bench_solution.u_star
        t = V.energy_terms(u, bench)
        assert abs(V.gateaux(u, u, bench)) < 1e-6 * (t["J"] + t["I"])

    def test_level_matches_ray_maximum(self, bench, bench_solution):
        # at a critical point the energy is maximal along its own ray
        u = bench_solution.u_star
        c = bench_solution.level_c
        for t in (0.9, 1.1):
            assert V.energy(t * u, bench) < c

    def test_iteration_cap_reports(self, bench):
        prob = ProblemSpec(bench.Y, bench.grid, bench.nl, SolverParams(max_iter=5))
        rep = V.solve_mountain_pass(prob)
        assert not rep.converged
        assert any("cap" in m for m in rep.messages)

    def test_report_json_is_stable(self, bench_solution):
        a = bench_solution.to_json()
        assert a == bench_solution.to_json()
        assert json.loads(a)["converged"] is True

    def test_ps_monitor(self, bench, bench_solution):
        mon = V.ps_monitor(bench_solution, bench)
        assert mon["ok"] and mon["rows"]

    def test_ps_monitor_zero(self, bench, bench_solution):
        rep = V.SolveReport(bench.grid.zeros(), 0.0, 0.0, bench_solution.geometry, [], True,
                            False, True, 0.0, 0, 0.0)
        row = V.ps_monitor(rep, bench)["rows"][0]
        assert row["lhs"] == 0.0 and row["rhs"] == 0.0

    def test_lloglt_runs(self):
        g = space.radial_grid(3, 0.5, 40, 20.0)
        prob = ProblemSpec(young.lloglt(), g, power_nonlinearity(2.5))
        rep = V.solve_mountain_pass(prob, enforce_conditions=False)
        assert rep.converged and rep.residual < 1e-2
        assert V.szulkin_check(rep.u_star, prob)["ok"]


class TestRadialize:
    def test_radial_identity(self, bench, rng):
        u = bench.grid.function(smooth_random(bench.grid, rng))
        assert V.radialize(u) is u

    def test_odd_part_removed(self):
        g = space.interval_grid(-1, 1, 40, 0.5)
        u = g.sample(lambda x: x ** 3 + np.cos(x))
        assert np.allclose(V.radialize(u).values, np.cos(g.nodes), atol=1e-12)

    def test_asymmetric_grid(self):
        g = space.interval_grid(0, 1, 10, 0.5)
        with pytest.raises(ValueError):
            V.radialize(g.zeros())

    def test_radialized_energy_spot_check(self, rng):
        g = space.interval_grid(-1, 1, 80, 0.5)
        prob = ProblemSpec(young.power(2.0, 0.5), g, power_nonlinearity(2.5))
        u = g.sample(lambda x: 3 * (1 - x ** 2) ** 2)
        pert = u + g.sample(lambda x: 0.2 * x * (1 - x ** 2))
        # spot check of the radial ansatz, not a guarantee
        assert V.energy(V.radialize(pert), prob) <= V.energy(pert, prob)


@given(st.integers(0, 2 ** 32 - 1))
def test_convexity_of_principal_part(seed):
    # Phi = J + I is convex: Phi(v) - Phi(u) >= Phi'(u)(v - u); at a critical
    # point Phi'(u) = f(u), which is the Szulkin inequality checked above
    g = space.interval_grid(-1, 1, 30, 0.5)
    prob = ProblemSpec(young.lloglt(), g, zero_nonlinearity())
    r = np.random.default_rng(seed)
    u, v = (g.function(smooth_random(g, r)) for _ in range(2))
    gap = V.energy(v, prob) - V.energy(u, prob) - V.gateaux(u, v - u, prob)
    assert gap >= -1e-10 * max(1.0, V.energy(u, prob))
