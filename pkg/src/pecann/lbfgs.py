"""Limited-memory BFGS with a strong Wolfe line search.

The implementation follows the classical two-loop recursion with an
initial scaling of ``s'y / y'y`` and a bracket/zoom line search enforcing
the strong Wolfe conditions (sufficient decrease plus the two-sided
curvature condition).  Curvature pairs with ``s'y <= 0`` are skipped so
the inverse-Hessian estimate stays positive definite; on a failed line
search the correction buffer is reset and the best point seen so far is
returned, leaving the caller free to retry from a steepest-descent step.

The correction buffer lives in an explicit :class:`LbfgsState` so a
caller running repeated short :func:`minimize` bursts on a slowly
changing objective (the augmented Lagrangian trainer) can carry curvature
information across calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    ConfigurationError,
    EvaluationError,
    NonDescentDirectionError,
)

__all__ = [
    "LbfgsConfig",
    "LbfgsState",
    "LineSearchResult",
    "MinimizeResult",
    "strong_wolfe_search",
    "two_loop_direction",
    "minimize",
]


@dataclass
class LbfgsConfig:
    """Optimizer settings.

    ``max_inner_iterations`` is the number of quasi-Newton steps per
    :func:`minimize` call (one outer training epoch).
    """

    max_inner_iterations: int = 5
    history_size: int = 10
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_line_search_evals: int = 25
    grad_tolerance: float = 1e-9

    def validate(self):
        if self.max_inner_iterations < 1:
            raise ConfigurationError("max_inner_iterations must be >= 1")
        if self.history_size < 1:
            raise ConfigurationError("history_size must be >= 1")
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ConfigurationError(
                "Wolfe constants must satisfy 0 < c1 < c2 < 1, got "
                f"c1={self.wolfe_c1}, c2={self.wolfe_c2}"
            )
        if self.max_line_search_evals < 1:
            raise ConfigurationError("max_line_search_evals must be >= 1")
        if self.grad_tolerance < 0.0:
            raise ConfigurationError("grad_tolerance must be >= 0")
        return self


@dataclass
class LbfgsState:
    """Curvature-pair ring buffer (s, y, rho = 1/s'y), newest last."""

    s: list = field(default_factory=list)
    y: list = field(default_factory=list)
    rho: list = field(default_factory=list)

    def push(self, s, y, history_size):
        sy = float(s @ y)
        if not np.isfinite(sy) or sy <= 0.0:
            return  # keep the estimate positive definite
        self.s.append(s)
        self.y.append(y)
        self.rho.append(1.0 / sy)
        while len(self.s) > history_size:
            self.s.pop(0)
            self.y.pop(0)
            self.rho.pop(0)

    def clear(self):
        self.s.clear()
        self.y.clear()
        self.rho.clear()

    def __len__(self):
        return len(self.s)


@dataclass(frozen=True)
class LineSearchResult:
    alpha: float
    value: float
    grad: np.ndarray
    evals: int
    converged: bool


@dataclass(frozen=True)
class MinimizeResult:
    theta: np.ndarray
    value: float
    grad: np.ndarray
    iterations: int
    n_evals: int
    status: str
    state: LbfgsState


def two_loop_direction(state, grad):
    """Apply the current inverse-Hessian estimate: returns ``H @ grad``."""
    q = np.array(grad, dtype=np.float64)
    m = len(state)
    if m == 0:
        return q
    alphas = np.empty(m)
    for i in range(m - 1, -1, -1):
        alphas[i] = state.rho[i] * (state.s[i] @ q)
        q -= alphas[i] * state.y[i]
    gamma = 1.0 / (state.rho[-1] * (state.y[-1] @ state.y[-1]))
    q *= gamma
    for i in range(m):
        beta = state.rho[i] * (state.y[i] @ q)
        q += (alphas[i] - beta) * state.s[i]
    return q


def _cubic_step(lo, f_lo, d_lo, hi, f_hi, d_hi):
    """Minimizer of the cubic Hermite interpolant, or None if degenerate."""
    if not (np.isfinite(f_hi) and np.isfinite(d_hi)):
        return None
    h = hi - lo
    if h == 0.0:
        return None
    d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (lo - hi)
    disc = d1 * d1 - d_lo * d_hi
    if disc < 0.0:
        return None
    d2 = np.sign(h) * np.sqrt(disc)
    denom = d_hi - d_lo + 2.0 * d2
    if denom == 0.0:
        return None
    step = hi - h * (d_hi + d2 - d1) / denom
    left, right = (lo, hi) if lo < hi else (hi, lo)
    span = right - left
    # reject steps crowding the interval ends; the caller bisects instead
    if not np.isfinite(step) or step < left + 0.1 * span or step > right - 0.1 * span:
        return None
    return step


def strong_wolfe_search(fun, x, direction, f0, g0, config):
    """Find a step length satisfying the strong Wolfe conditions.

    Bracketing phase doubles the trial step starting from 1; the zoom
    phase shrinks the bracket by cubic interpolation with bisection as
    fallback.  Non-finite trial values are treated as overshoots.  The
    total evaluation budget is ``config.max_line_search_evals``.
    """
    d = np.asarray(direction, dtype=np.float64)
    dphi0 = float(g0 @ d)
    if not np.isfinite(dphi0) or dphi0 >= 0.0:
        raise NonDescentDirectionError(
            f"line search needs a descent direction, got g'd = {dphi0}"
        )
    c1, c2 = config.wolfe_c1, config.wolfe_c2
    budget = config.max_line_search_evals
    evals = 0

    def phi(alpha):
        nonlocal evals
        evals += 1
        f, g = fun(x + alpha * d)
        return f, g, float(g @ d)

    def fail(best):
        if best is None:
            return LineSearchResult(0.0, f0, np.asarray(g0), evals, False)
        return LineSearchResult(best[0], best[1], best[2], evals, False)

    best = None  # lowest finite value seen: (alpha, f, g)

    def consider(alpha, f, g):
        nonlocal best
        if np.isfinite(f) and (best is None or f < best[1]):
            best = (alpha, f, g)

    def zoom(lo, f_lo, d_lo, g_lo, hi, f_hi, d_hi):
        nonlocal best
        while evals < budget:
            width = abs(hi - lo)
            if width <= 1e-16 * max(1.0, abs(lo)):
                return fail(best)
            alpha = _cubic_step(lo, f_lo, d_lo, hi, f_hi, d_hi)
            if alpha is None:
                alpha = 0.5 * (lo + hi)
            f, g, dphi = phi(alpha)
            consider(alpha, f, g)
            if not np.isfinite(f) or f > f0 + c1 * alpha * dphi0 or f >= f_lo:
                hi, f_hi, d_hi = alpha, f, dphi
                continue
            if abs(dphi) <= -c2 * dphi0:
                return LineSearchResult(alpha, f, g, evals, True)
            if dphi * (hi - lo) >= 0.0:
                hi, f_hi, d_hi = lo, f_lo, d_lo
            lo, f_lo, d_lo, g_lo = alpha, f, dphi, g
        return fail(best)

    alpha_prev, f_prev, d_prev, g_prev = 0.0, float(f0), dphi0, np.asarray(g0)
    alpha = 1.0
    first = True
    while evals < budget:
        f, g, dphi = phi(alpha)
        consider(alpha, f, g)
        if not np.isfinite(f) or f > f0 + c1 * alpha * dphi0 or (
            not first and f >= f_prev
        ):
            return zoom(alpha_prev, f_prev, d_prev, g_prev, alpha, f, dphi)
        if abs(dphi) <= -c2 * dphi0:
            return LineSearchResult(alpha, f, g, evals, True)
        if dphi >= 0.0:
            return zoom(alpha, f, dphi, g, alpha_prev, f_prev, d_prev)
        alpha_prev, f_prev, d_prev, g_prev = alpha, f, dphi, g
        alpha *= 2.0
        first = False
    return fail(best)


def minimize(fun, x0, config=None, state=None):
    """Run up to ``max_inner_iterations`` L-BFGS steps from ``x0``.

    ``fun(theta)`` must return ``(value, flat_gradient)``.  Statuses:
    ``converged`` (sup-norm of the gradient under tolerance),
    ``max_iterations`` and ``line_search_failure``.
    """
    config = (config or LbfgsConfig()).validate()
    state = state if state is not None else LbfgsState()
    x = np.array(x0, dtype=np.float64)
    f, g = fun(x)
    n_evals = 1
    if not np.isfinite(f):
        raise EvaluationError("objective is non-finite at the starting point")
    if np.max(np.abs(g)) <= config.grad_tolerance:
        return MinimizeResult(x, f, g, 0, n_evals, "converged", state)

    status = "max_iterations"
    iterations = 0
    for _ in range(config.max_inner_iterations):
        d = -two_loop_direction(state, g)
        gd = float(g @ d)
        if not np.all(np.isfinite(d)) or gd >= 0.0:
            state.clear()
            d = -g
        ls = strong_wolfe_search(fun, x, d, f, g, config)
        n_evals += ls.evals
        if not ls.converged:
            state.clear()
            if ls.value < f:
                x = x + ls.alpha * d
                f, g = ls.value, ls.grad
            status = "line_search_failure"
            break
        iterations += 1
        s = ls.alpha * d
        y = ls.grad - g
        state.push(s, y, config.history_size)
        x = x + s
        f, g = ls.value, ls.grad
        if np.max(np.abs(g)) <= config.grad_tolerance:
            status = "converged"
            break
    return MinimizeResult(x, f, g, iterations, n_evals, status, state)
