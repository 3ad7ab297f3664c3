import numpy as np
import pytest

from sedinv.optimize import minimize_bounded


def quadratic(center, scales):
    center = np.asarray(center, dtype=float)
    scales = np.asarray(scales, dtype=float)

    def fun(x):
        r = x - center
        return float(0.5 * np.sum(scales * r * r)), scales * r

    return fun


class TestUnconstrainedBehavior:
    def test_quadratic_bowl(self):
        fun = quadratic([1.0, -2.0, 0.5], [1.0, 4.0, 0.25])
        out = minimize_bounded(fun, np.zeros(3), -10.0, 10.0,
                               gradient_tolerance=1e-12)
        assert out.reason == "converged"
        assert np.allclose(out.x, [1.0, -2.0, 0.5], atol=1e-8)

    def test_rosenbrock(self):
        def fun(x):
            a, b = 1.0, 100.0
            f = (a - x[0]) ** 2 + b * (x[1] - x[0] ** 2) ** 2
            g = np.array([
                -2 * (a - x[0]) - 4 * b * x[0] * (x[1] - x[0] ** 2),
                2 * b * (x[1] - x[0] ** 2),
            ])
            return float(f), g

        out = minimize_bounded(fun, np.array([-1.2, 1.0]), -5.0, 5.0,
                               max_iterations=400, gradient_tolerance=1e-10)
        assert np.allclose(out.x, [1.0, 1.0], atol=1e-5)

    def test_history_non_increasing(self):
        fun = quadratic(np.arange(10.0), np.linspace(1, 30, 10))
        out = minimize_bounded(fun, np.full(10, 5.0), -100.0, 100.0,
                               max_iterations=50)
        hist = out.value_history
        assert all(b <= a for a, b in zip(hist, hist[1:]))
        assert len(out.step_history) == out.n_iterations


class TestBounds:
    def test_active_bound_solution(self):
        # unconstrained minimum at 3.0, box caps at 1.0
        fun = quadratic([3.0, 0.0], [1.0, 1.0])
        out = minimize_bounded(fun, np.zeros(2), -1.0, 1.0,
                               gradient_tolerance=1e-12)
        assert out.x[0] == pytest.approx(1.0, abs=1e-12)
        assert out.x[1] == pytest.approx(0.0, abs=1e-10)
        assert out.reason == "converged"

    def test_iterates_always_feasible(self):
        fun = quadratic([5.0, -5.0, 0.0], [1.0, 2.0, 3.0])
        seen = []
        out = minimize_bounded(fun, np.zeros(3), -2.0, 2.0,
                               callback=lambda it, x, f, g, s: seen.append(x.copy()))
        for x in seen:
            assert np.all(x >= -2.0) and np.all(x <= 2.0)
        assert np.all(out.x >= -2.0) and np.all(out.x <= 2.0)

    def test_start_outside_box_is_clipped(self):
        fun = quadratic([0.0], [1.0])
        out = minimize_bounded(fun, np.array([7.0]), -1.0, 1.0)
        assert abs(out.x[0]) <= 1.0


class TestTermination:
    def test_stationary_at_start(self):
        fun = quadratic([0.5], [2.0])
        out = minimize_bounded(fun, np.array([0.5]), 0.0, 1.0)
        assert out.reason in ("stationary", "converged")
        assert out.n_iterations == 0

    def test_max_iterations(self):
        fun = quadratic(np.arange(30.0), np.linspace(1.0, 50.0, 30))
        out = minimize_bounded(fun, np.zeros(30), -100.0, 100.0,
                               max_iterations=2, gradient_tolerance=0.0)
        assert out.reason == "max_iterations"
        assert out.n_iterations == 2

    def test_divergence_guard(self):
        # accepted steps are monotone, so drive the guard with a factor < 1:
        # any surviving value above factor * initial aborts at the next pass
        fun = quadratic([10.0], [1.0])
        out = minimize_bounded(fun, np.array([0.0]), -50.0, 50.0,
                               divergence_factor=0.2, max_iterations=20)
        assert out.reason == "divergence"

    def test_non_finite_trials_are_backtracked(self):
        def fun(x):
            if abs(x[0]) > 2.0:
                return float("inf"), np.array([0.0])
            return float((x[0] - 1.0) ** 2), np.array([2 * (x[0] - 1.0)])

        out = minimize_bounded(fun, np.array([-1.9]), -50.0, 50.0,
                               max_iterations=60, gradient_tolerance=1e-10)
        assert out.x[0] == pytest.approx(1.0, abs=1e-6)

    def test_memory_limit_respected(self):
        fun = quadratic(np.arange(8.0), np.linspace(0.5, 4.0, 8))
        out = minimize_bounded(fun, np.zeros(8), -50.0, 50.0, memory=2,
                               max_iterations=60, gradient_tolerance=1e-10)
        assert np.allclose(out.x, np.arange(8.0), atol=1e-6)
