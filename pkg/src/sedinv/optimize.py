"""Bound-constrained limited-memory quasi-Newton minimizer.

Two-loop L-BFGS directions projected onto box constraints, with a
strong-Wolfe backtracking line search (c1 = 1e-4, c2 = 0.9). Termination
reasons: "converged" (projected gradient below tolerance), "stationary"
(zero projected gradient at the start), "max_iterations",
"line_search_failure", "divergence" (objective exceeded 10x its initial
value). The full per-iterate history is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["OptimizeOutcome", "minimize_bounded"]


@dataclass
class OptimizeOutcome:
    x: np.ndarray
    value: float
    grad: np.ndarray
    n_iterations: int
    reason: str
    value_history: list[float] = field(default_factory=list)
    grad_norm_history: list[float] = field(default_factory=list)
    step_history: list[float] = field(default_factory=list)


def _projected_gradient(x, g, lower, upper):
    return x - np.clip(x - g, lower, upper)


def _two_loop(g, s_list, y_list):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_list), reversed(y_list)):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if s_list:
        s, y = s_list[-1], y_list[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y), a in zip(zip(s_list, y_list), reversed(alphas)):
        rho = 1.0 / float(y @ s)
        b = rho * float(y @ q)
        q += (a - b) * s
    return q


def _wolfe_search(fun, x, f0, g0, d, slope0, lower, upper, c1, c2,
                  alpha0, max_evals):
    """Strong-Wolfe line search along the projected path P(x + alpha d).

    Expansion to bracket a Wolfe point, then bisection zoom. Returns the
    accepted (x, f, g, alpha); when the evaluation budget runs out, the best
    sufficient-decrease point seen; None if nothing decreased.
    """
    evals = 0
    best = None

    def probe(alpha):
        nonlocal evals, best
        x_t = np.clip(x + alpha * d, lower, upper)
        f_t, g_t = fun(x_t)
        evals += 1
        if np.isfinite(f_t):
            # derivative of the projected path: clipped components are frozen
            free = (x_t > lower) & (x_t < upper)
            dphi = float(g_t[free] @ d[free]) if free.any() else 0.0
            sufficient = f_t <= f0 + c1 * alpha * slope0 and f_t <= f0
        else:
            dphi = 0.0
            sufficient = False
        if sufficient and (best is None or f_t < best[1]):
            best = (x_t, f_t, g_t, alpha)
        return (x_t, f_t, g_t, dphi, sufficient)

    def zoom(a_lo, f_lo, a_hi):
        nonlocal evals
        while evals < max_evals and abs(a_hi - a_lo) > 1e-12 * max(1.0, a_lo):
            a = 0.5 * (a_lo + a_hi)
            x_t, f_t, g_t, dphi, sufficient = probe(a)
            if not sufficient or f_t >= f_lo:
                a_hi = a
                continue
            if abs(dphi) <= -c2 * slope0:
                return (x_t, f_t, g_t, a)
            if dphi * (a_hi - a_lo) >= 0.0:
                a_hi = a_lo
            a_lo, f_lo = a, f_t
        return None

    a_prev, f_prev = 0.0, f0
    alpha = alpha0
    first = True
    while evals < max_evals:
        x_t, f_t, g_t, dphi, sufficient = probe(alpha)
        if not sufficient or (not first and f_t >= f_prev):
            hit = zoom(a_prev, f_prev, alpha)
            return hit or best
        if abs(dphi) <= -c2 * slope0:
            return (x_t, f_t, g_t, alpha)
        if dphi >= 0.0:
            hit = zoom(alpha, f_t, a_prev)
            return hit or best
        a_prev, f_prev = alpha, f_t
        alpha *= 2.2
        first = False
        if alpha > 1e8:
            break
    return best


def minimize_bounded(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    lower: np.ndarray | float,
    upper: np.ndarray | float,
    *,
    memory: int = 10,
    max_iterations: int = 100,
    gradient_tolerance: float = 1e-10,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_line_evaluations: int = 30,
    divergence_factor: float = 10.0,
    callback: Callable[[int, np.ndarray, float, float, float], None] | None = None,
) -> OptimizeOutcome:
    """Minimize fun (returning value and gradient) over the box [lower, upper].

    The callback, if given, receives (iteration, x, value, grad_norm, step)
    after every accepted step.
    """
    if memory < 1:
        raise ValueError(f"memory must be >= 1, got {memory}")
    x = np.clip(np.asarray(x0, dtype=np.float64), lower, upper)
    f, g = fun(x)
    f0 = f
    value_history = [f]
    pg = _projected_gradient(x, g, lower, upper)
    pg_norm = float(np.max(np.abs(pg))) if pg.size else 0.0
    grad_norm_history = [pg_norm]
    step_history: list[float] = []

    s_list: list[np.ndarray] = []
    y_list: list[np.ndarray] = []
    reason = "max_iterations"
    it = 0

    if pg_norm == 0.0:
        reason = "stationary"
        max_iterations = 0
    elif pg_norm <= gradient_tolerance:
        reason = "converged"
        max_iterations = 0

    while it < max_iterations:
        if f > divergence_factor * max(f0, 1e-300):
            reason = "divergence"
            break
        d = -_two_loop(g, s_list, y_list)
        # zero components pushing out of active bounds
        at_lo = (x <= lower) & (d < 0)
        at_hi = (x >= upper) & (d > 0)
        d[at_lo | at_hi] = 0.0
        slope = float(g @ d)
        if slope >= 0.0:
            d = -pg
            slope = float(g @ d)
            if slope >= 0.0:
                reason = "stationary"
                break

        alpha0 = 1.0 if s_list else min(1.0, 1.0 / max(np.linalg.norm(d), 1e-300))
        accepted = _wolfe_search(fun, x, f, g, d, slope, lower, upper,
                                 c1, c2, alpha0, max_line_evaluations)
        if accepted is None and s_list:
            # curvature pairs may be stale (e.g. kinked objectives); retry
            # once from a cleared memory along the projected steepest descent
            s_list.clear()
            y_list.clear()
            d = -pg
            slope = float(g @ d)
            if slope < 0.0:
                accepted = _wolfe_search(
                    fun, x, f, g, d, slope, lower, upper, c1, c2,
                    min(1.0, 1.0 / max(np.linalg.norm(d), 1e-300)),
                    max_line_evaluations)
        if accepted is None:
            reason = "line_search_failure"
            break

        x_new, f_new, g_new, alpha = accepted
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_list.append(s)
            y_list.append(y)
            if len(s_list) > memory:
                s_list.pop(0)
                y_list.pop(0)
        x, f, g = x_new, f_new, g_new
        it += 1
        pg = _projected_gradient(x, g, lower, upper)
        pg_norm = float(np.max(np.abs(pg)))
        value_history.append(f)
        grad_norm_history.append(pg_norm)
        step_history.append(alpha)
        if callback is not None:
            callback(it, x, f, pg_norm, alpha)
        if pg_norm <= gradient_tolerance:
            reason = "converged"
            break

    return OptimizeOutcome(
        x=x, value=f, grad=g, n_iterations=it, reason=reason,
        value_history=value_history, grad_norm_history=grad_norm_history,
        step_history=step_history,
    )
