"""Optimizer tests: two-loop recursion, Wolfe conditions, convergence."""

import numpy as np
import pytest

from pecann.exceptions import (
    ConfigurationError,
    EvaluationError,
    NonDescentDirectionError,
)
from pecann.lbfgs import (
    LbfgsConfig,
    LbfgsState,
    minimize,
    strong_wolfe_search,
    two_loop_direction,
)


def quadratic(theta):
    return 0.5 * float(theta @ theta), theta.copy()


def rosenbrock(theta):
    x, y = theta
    f = (1.0 - x) ** 2 + 100.0 * (y - x * x) ** 2
    g = np.array(
        [-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)]
    )
    return f, g


class TestTwoLoop:
    def make_state(self, rng, n, m):
        state = LbfgsState()
        for _ in range(m):
            s = rng.normal(size=n)
            y = s + 0.1 * rng.normal(size=n)  # keeps s'y > 0 w.h.p.
            if s @ y <= 0:
                y = s
            state.push(s, y, history_size=10)
        return state

    def dense_inverse_hessian(self, state, n):
        gamma = 1.0 / (state.rho[-1] * (state.y[-1] @ state.y[-1]))
        H = gamma * np.eye(n)
        for s, y, rho in zip(state.s, state.y, state.rho):
            V = np.eye(n) - rho * np.outer(y, s)
            H = V.T @ H @ V + rho * np.outer(s, s)
        return H

    def test_matches_dense_inverse_hessian(self):
        rng = np.random.default_rng(0)
        for n, m in [(3, 1), (5, 3), (8, 4)]:
            state = self.make_state(rng, n, m)
            H = self.dense_inverse_hessian(state, n)
            for _ in range(5):
                g = rng.normal(size=n)
                np.testing.assert_allclose(
                    two_loop_direction(state, g), H @ g, rtol=1e-12, atol=1e-12
                )

    def test_empty_state_is_identity(self):
        g = np.array([1.0, -2.0])
        np.testing.assert_array_equal(two_loop_direction(LbfgsState(), g), g)

    def test_direction_is_descent(self):
        rng = np.random.default_rng(1)
        for seed in range(20):
            state = self.make_state(rng, 6, 4)
            g = rng.normal(size=6)
            assert g @ two_loop_direction(state, g) > 0.0

    def test_nonpositive_curvature_pairs_skipped(self):
        state = LbfgsState()
        s = np.array([1.0, 0.0])
        state.push(s, -s, history_size=10)
        state.push(s, 0.0 * s, history_size=10)
        assert len(state) == 0

    def test_history_size_bounds_buffer(self):
        state = LbfgsState()
        for i in range(7):
            s = np.array([1.0 + i, 0.5])
            state.push(s, s, history_size=3)
        assert len(state) == 3
        assert state.s[0][0] == 5.0  # oldest pairs evicted


class TestStrongWolfe:
    def check_conditions(self, fun, x, d, result, config):
        f0, g0 = fun(x)
        dphi0 = g0 @ d
        f, g = fun(x + result.alpha * d)
        assert f <= f0 + config.wolfe_c1 * result.alpha * dphi0 + 1e-14
        assert abs(g @ d) <= -config.wolfe_c2 * dphi0 + 1e-14

    def test_unit_step_accepted_on_isotropic_quadratic(self):
        config = LbfgsConfig()
        x = np.array([3.0, -4.0])
        f0, g0 = quadratic(x)
        result = strong_wolfe_search(quadratic, x, -g0, f0, g0, config)
        assert result.converged
        assert result.alpha == 1.0
        assert result.evals == 1

    @pytest.mark.parametrize("scale", [1.0, 100.0, 1e4])
    def test_conditions_hold_on_anisotropic_quadratics(self, scale):
        config = LbfgsConfig()
        A = np.diag([1.0, scale])

        def fun(theta):
            return 0.5 * float(theta @ A @ theta), A @ theta

        rng = np.random.default_rng(int(scale))
        for _ in range(10):
            x = rng.normal(size=2) * 3.0
            f0, g0 = fun(x)
            if np.linalg.norm(g0) < 1e-12:
                continue
            result = strong_wolfe_search(fun, x, -g0, f0, g0, config)
            assert result.converged
            assert result.alpha > 0.0
            self.check_conditions(fun, x, -g0, result, config)

    def test_conditions_hold_on_quartic(self):
        config = LbfgsConfig()

        def fun(theta):
            return float((theta ** 4).sum()), 4.0 * theta ** 3

        x = np.array([1.5, -0.7])
        f0, g0 = fun(x)
        result = strong_wolfe_search(fun, x, -g0, f0, g0, config)
        assert result.converged
        self.check_conditions(fun, x, -g0, result, config)

    def test_growth_phase_reaches_distant_minimum(self):
        # minimum at alpha = 64 along d: forces repeated bracket doubling
        config = LbfgsConfig()

        def fun(theta):
            return 0.5 * float(theta @ theta), theta.copy()

        x = np.array([128.0])
        d = np.array([-1.0])
        f0, g0 = fun(x)
        result = strong_wolfe_search(fun, x, d, f0, g0, config)
        assert result.converged
        self.check_conditions(fun, x, d, result, config)

    def test_non_descent_direction_raises(self):
        x = np.array([1.0, 1.0])
        f0, g0 = quadratic(x)
        with pytest.raises(NonDescentDirectionError):
            strong_wolfe_search(quadratic, x, +g0, f0, g0, LbfgsConfig())

    def test_nan_wall_reports_failure(self):
        config = LbfgsConfig()

        def fun(theta):
            if theta[0] > 0.0:
                return np.nan, np.array([np.nan])
            return -float(theta[0]), np.array([-1.0])

        x = np.array([0.0])
        f0, g0 = fun(x)
        result = strong_wolfe_search(fun, x, np.array([1.0]), f0, g0, config)
        assert not result.converged
        assert result.evals <= config.max_line_search_evals


class TestMinimize:
    def test_isotropic_quadratic_in_three_iterations(self):
        result = minimize(quadratic, np.array([5.0, -3.0, 2.0]))
        assert result.status == "converged"
        assert result.iterations <= 3
        assert np.linalg.norm(result.theta) <= 1e-10

    def test_anisotropic_quadratic(self):
        A = np.diag([1.0, 10.0, 100.0])

        def fun(theta):
            return 0.5 * float(theta @ A @ theta), A @ theta

        config = LbfgsConfig(max_inner_iterations=100, grad_tolerance=1e-10)
        result = minimize(fun, np.array([1.0, 1.0, 1.0]), config)
        assert result.status == "converged"
        assert np.linalg.norm(result.theta) <= 1e-8

    def test_rosenbrock_accuracy_vs_gradient_descent_oracle(self):
        # independent oracle: long plain-gradient-descent run approaches the
        # same minimizer the analytic check f(1,1)=0 pins down
        assert rosenbrock(np.array([1.0, 1.0]))[0] == 0.0
        x = np.array([1.2, 1.2])
        for _ in range(100_000):
            _, g = rosenbrock(x)
            x -= 1e-3 * g
        assert np.linalg.norm(x - 1.0) < 1e-2

        config = LbfgsConfig(max_inner_iterations=200, grad_tolerance=1e-12)
        result = minimize(rosenbrock, np.array([-1.2, 1.0]), config)
        assert result.value < rosenbrock(x)[0]
        assert np.linalg.norm(result.theta - 1.0) <= 1e-8

    def test_constant_objective_converges_immediately(self):
        def fun(theta):
            return 4.0, np.zeros_like(theta)

        x0 = np.array([1.0, 2.0])
        result = minimize(fun, x0)
        assert result.status == "converged"
        assert result.iterations == 0
        np.testing.assert_array_equal(result.theta, x0)

    def test_max_iterations_status(self):
        A = np.diag([1.0, 1000.0])

        def fun(theta):
            return 0.5 * float(theta @ A @ theta), A @ theta

        config = LbfgsConfig(max_inner_iterations=2)
        result = minimize(fun, np.array([1.0, 1.0]), config)
        assert result.status == "max_iterations"
        assert result.iterations == 2

    def test_line_search_failure_resets_state_and_keeps_best(self):
        def fun(theta):
            if theta[0] > 0.0:
                return np.nan, np.array([np.nan])
            return -float(theta[0]), np.array([-1.0])

        result = minimize(fun, np.array([0.0]))
        assert result.status == "line_search_failure"
        assert len(result.state) == 0
        np.testing.assert_array_equal(result.theta, [0.0])

    def test_state_persists_across_calls(self):
        A = np.diag([1.0, 30.0, 300.0])

        def fun(theta):
            return 0.5 * float(theta @ A @ theta), A @ theta

        config = LbfgsConfig(max_inner_iterations=4)
        first = minimize(fun, np.array([1.0, 1.0, 1.0]), config)
        assert len(first.state) > 0
        second = minimize(fun, first.theta, config, state=first.state)
        assert second.value < first.value

    def test_monotone_decrease_across_iterations(self):
        rng = np.random.default_rng(4)
        M = rng.normal(size=(6, 6))
        A = M @ M.T + 0.5 * np.eye(6)

        def fun(theta):
            return 0.5 * float(theta @ A @ theta), A @ theta

        x = rng.normal(size=6)
        values = [fun(x)[0]]
        state = LbfgsState()
        config = LbfgsConfig(max_inner_iterations=1)
        for _ in range(15):
            result = minimize(fun, x, config, state=state)
            x, state = result.theta, result.state
            values.append(result.value)
        assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))

    def test_nonfinite_start_rejected(self):
        def fun(theta):
            return np.nan, theta

        with pytest.raises(EvaluationError):
            minimize(fun, np.array([0.0]))


class TestConfigValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"max_inner_iterations": 0},
            {"history_size": 0},
            {"wolfe_c1": 0.0},
            {"wolfe_c1": 0.95, "wolfe_c2": 0.9},
            {"wolfe_c2": 1.0},
            {"max_line_search_evals": 0},
            {"grad_tolerance": -1.0},
        ],
    )
    def test_invalid_settings_rejected(self, kwargs):
        with pytest.raises(ConfigurationError):
            LbfgsConfig(**kwargs).validate()

    def test_defaults_are_valid(self):
        config = LbfgsConfig().validate()
        assert config.history_size == 10
        assert config.wolfe_c1 == 1e-4
        assert config.wolfe_c2 == 0.9
        assert config.max_line_search_evals == 25
        assert config.grad_tolerance == 1e-9
