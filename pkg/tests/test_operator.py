import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracorlicz import operator as op
from fracorlicz import space, young
from fracorlicz.problem import ProblemSpec, power_nonlinearity
from fracorlicz.variational import gradient_dual_norm


@pytest.fixture(scope="module")
def line():
    return space.interval_grid(-1.0, 1.0, 400, 0.5)


def bump(x):
    return (1.0 - x ** 2) ** 2


class TestWeakPairing:
    def test_constant_u(self, line):
        u = line.sample(lambda x: 0 * x + 3.0)
        v = line.sample(np.sin)
        assert op.apply_weak(u, v, young.lloglt()).value == 0.0

    def test_bilinear_quadratic(self, line, rng):
        Y = young.power(2.0, 0.5)
        u, v, w = (line.function(rng.normal(size=line.size)) for _ in range(3))
        a = 1.7
        lhs = op.apply_weak(u, a * v + w, Y).value
        rhs = a * op.apply_weak(u, v, Y).value + op.apply_weak(u, w, Y).value
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)

    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_homogeneity(self, line, rng, p):
        Y = young.power(p)
        u = line.function(rng.normal(size=line.size))
        assert op.apply_weak(2 * u, 2 * u, Y).value == pytest.approx(
            2 ** p * op.apply_weak(u, u, Y).value, rel=1e-9)

    def test_symmetric_in_linear_case(self, line, rng):
        Y = young.power(2.0, 0.5)
        u, v = (line.function(rng.normal(size=line.size)) for _ in range(2))
        assert abs(op.apply_weak(u, v, Y).value - op.apply_weak(v, u, Y).value) <= 1e-10 * max(
            1.0, abs(op.apply_weak(u, v, Y).value))

    def test_action_matches_pairing(self, line, rng):
        Y = young.lloglt()
        u, v = (line.function(rng.normal(size=line.size)) for _ in range(2))
        assert np.dot(op.weak_action(u, Y), v.values) == pytest.approx(
            op.apply_weak(u, v, Y).value, rel=1e-10)

    def test_error_estimate_reported(self, line):
        u = line.sample(bump)
        res = op.apply_weak(u, u, young.power(2.0, 0.5))
        assert 0.0 < res.quadrature_error_estimate < res.value

    def test_periodic_translation_invariance(self, rng):
        g = space.periodic_grid(2.0, 64, 0.4)
        Y = young.lloglt()
        u, v = (g.function(rng.normal(size=g.size)) for _ in range(2))
        base = op.apply_weak(u, v, Y).value
        for k in (1, 5, 17):
            us, vs = g.function(np.roll(u.values, k)), g.function(np.roll(v.values, k))
            assert op.apply_weak(us, vs, Y).value == pytest.approx(base, rel=1e-10, abs=1e-10)


class TestPointwise:
    @pytest.mark.parametrize("Y", [young.power(2.0, 0.5), young.power(3.0)])
    def test_duality_consistency(self, line, Y):
        u, v = line.sample(bump), line.sample(lambda x: np.cos(np.pi * x / 2) ** 2)
        w = line.cell_weights
        pw = np.array([op.apply_pointwise(u, i, Y) for i in range(1, line.size - 1)])
        lhs = float(np.sum(pw * v.values[1:-1] * w[1:-1]))
        assert lhs == pytest.approx(op.apply_weak(u, v, Y).value, rel=0.05)

    def test_constant(self, line):
        u = line.sample(lambda x: 0 * x + 1.0)
        assert all(op.apply_pointwise(u, i, young.lloglt()) == 0.0 for i in (1, 100, 399))

    def test_odd_function_vanishes_at_center(self, line):
        u = line.sample(lambda x: x * (1 - x ** 2))
        assert abs(op.apply_pointwise(u, 200, young.power(2.0, 0.5))) < 1e-12

    def test_boundary_nodes_rejected(self, line):
        u = line.sample(bump)
        with pytest.raises(ValueError):
            op.apply_pointwise(u, 0, young.power(2.0))
        with pytest.raises(ValueError):
            op.apply_pointwise(u, line.size - 1, young.power(2.0))
        rg = space.radial_grid(3, 0.5, 20, 5.0)
        with pytest.raises(ValueError):
            op.apply_pointwise(rg.zeros(), rg.size - 1, young.power(2.0))

    def test_radial_duality(self):
        g = space.radial_grid(3, 0.5, 200, 8.0)
        Y = young.power(2.0, 0.5)
        u = g.sample(lambda r: np.exp(-r ** 2))
        v = g.sample(lambda r: np.exp(-r ** 2 / 4) * (r < 8))
        v.values[-1] = 0.0
        pw = np.array([op.apply_pointwise(u, i, Y) for i in range(g.size - 1)])
        lhs = float(np.sum(pw * v.values[:-1] * g.cell_weights[:-1]))
        assert lhs == pytest.approx(op.apply_weak(u, v, Y).value, rel=0.05)


class TestResidual:
    def test_zero(self, line):
        prob = ProblemSpec(young.power(2.0, 0.5), line, power_nonlinearity(2.5))
        assert op.weak_residual(line.zeros(), prob) == 0.0

    def test_equals_gradient_norm(self, rng):
        g = space.radial_grid(3, 0.5, 80, 10.0)
        prob = ProblemSpec(young.lloglt(), g, power_nonlinearity(2.5))
        u = g.function(rng.normal(size=g.size))
        assert abs(op.weak_residual(u, prob) - gradient_dual_norm(u, prob)) < 1e-8

    def test_wrong_grid(self, line):
        other = space.interval_grid(-1.0, 1.0, 10, 0.5)
        prob = ProblemSpec(young.power(2.0), line, power_nonlinearity(2.5))
        with pytest.raises(ValueError):
            op.weak_residual(other.zeros(), prob)

    def test_radial_excludes_sphere_node(self):
        g = space.radial_grid(3, 0.5, 20, 5.0)
        assert g.size - 1 not in op.test_nodes(g)


@given(st.integers(0, 2 ** 32 - 1))
def test_pairing_nonnegative_on_diagonal(seed):
    r = np.random.default_rng(seed)
    g = space.interval_grid(0, 1, 30, 0.3)
    u = g.function(r.normal(size=g.size))
    assert op.apply_weak(u, u, young.lloglt()).value >= 0.0


@given(st.integers(0, 2 ** 32 - 1))
def test_monotone_operator(seed):
    r = np.random.default_rng(seed)
    g = space.interval_grid(0, 1, 30, 0.3)
    Y = young.power(1.5)
    u, v = (g.function(r.normal(size=g.size) * 10 ** r.uniform(-1, 1)) for _ in range(2))
    d = u - v
    assert op.apply_weak(u, d, Y).value - op.apply_weak(v, d, Y).value >= -1e-9
