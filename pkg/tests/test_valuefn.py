import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefbayes.domain import Alternative, Criterion, Problem
from prefbayes.valuefn import (
    PiecewiseConfig,
    characteristic_matrix,
    characteristic_vector,
    comprehensive_value,
    from_unconstrained,
    marginal_difference,
    simplex_chain_grad,
    to_unconstrained,
    value_difference,
)


def one_criterion_problem(direction, lo, hi, g):
    return Problem(
        criteria=[Criterion("g1", "g1", direction, lo, hi)],
        alternatives=[Alternative("a", "a"), Alternative("b", "b")],
        performances=[[g], [lo]],
    )


class TestCharacteristicVector:
    def test_gain_midpoint(self):
        p = one_criterion_problem("gain", 0.0, 1000.0, 500.0)
        v = characteristic_vector(p, PiecewiseConfig({"g1": 2}), "a")
        assert v == pytest.approx([1.0, 0.0], abs=1e-12)

    def test_gain_interior(self):
        p = one_criterion_problem("gain", 0.0, 1000.0, 750.0)
        v = characteristic_vector(p, PiecewiseConfig({"g1": 2}), "a")
        assert v == pytest.approx([1.0, 0.5], abs=1e-12)

    def test_cost_reflection_monthly_fee(self, problem, config2):
        # 59 on a [29, 199] cost scale reflects to 169.
        v = characteristic_vector(problem, config2, "a7")
        block = v[8:10]  # fifth criterion's block
        assert block == pytest.approx([1.0, 0.647059], abs=1e-6)

    def test_extremes(self):
        p = one_criterion_problem("gain", 0.0, 10.0, 10.0)
        assert characteristic_vector(p, PiecewiseConfig({"g1": 3}), "a") == pytest.approx(
            [1.0, 1.0, 1.0]
        )
        assert characteristic_vector(p, PiecewiseConfig({"g1": 3}), "b") == pytest.approx(
            [0.0, 0.0, 0.0]
        )

    def test_entries_within_unit_interval_and_saturating(self, problem):
        config = PiecewiseConfig.shared(problem, 3)
        V = characteristic_matrix(problem, config)
        assert np.all(V >= 0.0) and np.all(V <= 1.0)
        for blk in config.block_slices(problem):
            block = V[:, blk]
            assert np.all(np.diff(block, axis=1) <= 1e-12)

    def test_best_cost_performance_maps_to_full_block(self, problem, config2):
        # a2 has the cheapest monthly fee, the ideal level on a cost scale.
        v = characteristic_vector(problem, config2, "a2")
        assert v[8:10] == pytest.approx([1.0, 1.0])


class TestValueOperations:
    def test_comprehensive_value_dot(self):
        u = np.array([0.25, 0.75])
        v = np.array([1.0, 0.5])
        assert comprehensive_value(u, v) == pytest.approx(0.625)

    def test_value_difference_absolute(self):
        u = np.array([0.5, 0.5])
        va, vb = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        assert value_difference(u, va, vb) == pytest.approx(0.0)
        assert value_difference(u, va, np.array([0.0, 0.0])) == pytest.approx(0.5)

    def test_marginal_difference_block(self):
        u = np.array([0.3, 0.7])
        va, vb = np.array([1.0, 0.2]), np.array([0.4, 0.9])
        assert marginal_difference(u, va, vb, slice(0, 1)) == pytest.approx(0.18)
        assert marginal_difference(u, va, vb, slice(1, 2)) == pytest.approx(0.49)


class TestSimplexTransform:
    def test_zero_maps_to_uniform(self):
        u, _ = from_unconstrained(np.zeros(11))
        assert u == pytest.approx(np.full(12, 1 / 12), abs=1e-12)

    def test_roundtrip(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            u = rng.dirichlet(np.ones(8))
            u2, _ = from_unconstrained(to_unconstrained(u))
            assert u2 == pytest.approx(u, abs=1e-10)
        for _ in range(20):
            z = rng.normal(size=7)
            u, _ = from_unconstrained(z)
            assert to_unconstrained(u) == pytest.approx(z, abs=1e-12)

    def test_log_jacobian_matches_finite_differences(self):
        # log|J| of the map z -> u (first n-1 coordinates).
        rng = np.random.default_rng(2)
        n = 5
        for _ in range(10):
            z = rng.normal(size=n - 1)
            h = 1e-6
            J = np.zeros((n - 1, n - 1))
            for i in range(n - 1):
                zp, zm = z.copy(), z.copy()
                zp[i] += h
                zm[i] -= h
                up, _ = from_unconstrained(zp)
                um, _ = from_unconstrained(zm)
                J[:, i] = (up[: n - 1] - um[: n - 1]) / (2 * h)
            _, logj = from_unconstrained(z)
            _, fd_logj = np.linalg.slogdet(J)
            assert logj == pytest.approx(fd_logj, abs=1e-6)

    def test_chain_grad_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        n = 9
        a = rng.normal(size=n)  # arbitrary linear functional of u

        def f(z):
            u, logj = from_unconstrained(z)
            return float(a @ u) + logj

        for _ in range(10):
            z = rng.normal(size=n - 1)
            grad = simplex_chain_grad(z, a)
            h = 1e-6
            fd = np.array(
                [
                    (f(z + h * np.eye(n - 1)[i]) - f(z - h * np.eye(n - 1)[i])) / (2 * h)
                    for i in range(n - 1)
                ]
            )
            assert grad == pytest.approx(fd, abs=1e-5)

    @given(st.lists(st.floats(-8, 8), min_size=2, max_size=15))
    @settings(max_examples=100, deadline=None)
    def test_output_always_on_simplex(self, zs):
        u, logj = from_unconstrained(np.array(zs))
        assert np.all(u > 0)
        assert np.sum(u) == pytest.approx(1.0, abs=1e-10)
        assert np.isfinite(logj)

    def test_interior_requirement(self):
        with pytest.raises(ValueError):
            to_unconstrained(np.array([0.0, 1.0]))


class TestPiecewiseConfig:
    def test_total_dim_and_blocks(self, problem):
        config = PiecewiseConfig({c.id: i + 1 for i, c in enumerate(problem.criteria)})
        assert config.total_dim(problem) == 21
        blocks = config.block_slices(problem)
        assert blocks[0] == slice(0, 1)
        assert blocks[-1] == slice(15, 21)

    def test_rejects_zero_subintervals(self):
        with pytest.raises(ValueError):
            PiecewiseConfig({"g1": 0})
