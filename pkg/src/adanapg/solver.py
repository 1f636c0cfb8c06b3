"""Accelerated proximal gradient with adaptive sampling, plus baselines.

Algorithms
----------
adanapg
    Nesterov-accelerated proximal gradient whose batch at ``y_n`` is grown
    until the inner-product and orthogonality tests pass.  Step size
    ``1 / (L (theta^2 + nu^2 + 1))``.
prox_gradient
    Same update with all momentum set to zero (GEOM baseline).
accel_prox_gradient
    Accelerated update driven by a deterministic schedule (POLY baseline).
full_gradient_accel
    Accelerated update with exact gradients; used as the ground-truth oracle.

Schedule-driven and exact-gradient solvers default to step ``1 / L``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import CapabilityError, RandomStream, as_vector
from .prox import gradient_mapping
from .sampling import SamplingSchedule, adaptive_acquire, schedule_acquire, schedule_size

ALGORITHMS = ("adanapg", "prox_gradient", "accel_prox_gradient", "full_gradient_accel")
MODES = ("general", "strongly_convex")


class OracleConvergenceError(RuntimeError):
    def __init__(self, gmap_norm, x, iterations):
        super().__init__(gmap_norm, x, iterations)
        self.gmap_norm, self.x, self.iterations = gmap_norm, x, iterations

    def __str__(self):
        return (f"oracle did not converge in {self.iterations} iterations "
                f"(final gradient-mapping norm {self.gmap_norm:.3e})")


@dataclass
class SolverOptions:
    algorithm: str = "adanapg"
    mode: str = "general"
    max_iterations: int = 100
    stop_gmap_tol: float | None = None
    pi0: float = 1.0
    alpha_override: float | None = None
    sample_budget: int | None = None
    record_noise: bool = False
    record_iterates: bool = False
    x0: np.ndarray | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")
        if self.stop_gmap_tol is not None and self.stop_gmap_tol < 0:
            raise ValueError("stop_gmap_tol must be nonnegative")
        if not 0 < self.pi0 <= 1:
            raise ValueError("pi0 must lie in (0, 1]")
        if self.alpha_override is not None and not self.alpha_override > 0:
            raise ValueError("alpha_override must be positive")
        if self.sample_budget is not None and self.sample_budget < 1:
            raise ValueError("sample_budget must be positive")


@dataclass
class SolverState:
    x_curr: np.ndarray
    x_prev: np.ndarray
    y: np.ndarray
    pi: float
    alpha: float
    q: float
    n: int = 0
    cum_samples: int = 0


@dataclass
class IterationRecord:
    n: int
    batch_size: int
    cum_samples: int
    objective: float | None
    dist_sq: float | None
    gmap_norm: float
    test_rounds: int
    budget_capped: bool
    elapsed_ns: int
    noise: np.ndarray | None = field(default=None, repr=False)
    x: np.ndarray | None = field(default=None, repr=False)


def pi_next(pi_n: float, q: float) -> float:
    """Positive root of ``p^2 - (q - pi_n^2) p - pi_n^2 = 0``."""
    b = q - pi_n * pi_n
    disc = math.sqrt(b * b + 4.0 * pi_n * pi_n)
    if b >= 0:
        return 0.5 * (b + disc)
    # conjugate form avoids cancellation when b < 0
    return 2.0 * pi_n * pi_n / (disc - b)


def momentum_coeff(pi_n: float, pi_nxt: float) -> float:
    return pi_n * (1.0 - pi_n) / (pi_n * pi_n + pi_nxt)


def constant_momentum(q: float) -> float:
    s = math.sqrt(q)
    return (1.0 - s) / (1.0 + s)


def step_size(problem, schedule: SamplingSchedule | None, options: SolverOptions) -> float:
    if options.alpha_override is not None:
        return options.alpha_override
    if options.algorithm == "adanapg" or (schedule is not None and schedule.kind == "adaptive"):
        return 1.0 / (problem.lipschitz * schedule.params.inflation)
    return 1.0 / problem.lipschitz


def _validate(problem, options, schedule):
    if options.mode == "strongly_convex" and not problem.mu > 0:
        raise ValueError("strongly_convex mode requires a positive strong-convexity constant")
    if options.algorithm == "full_gradient_accel":
        if not problem.has_full_gradient:
            raise CapabilityError("full_gradient_accel requires an exact gradient")
        return
    if schedule is None:
        raise ValueError(f"{options.algorithm} needs a sampling schedule")
    if options.algorithm == "adanapg" and schedule.kind != "adaptive":
        raise ValueError("adanapg requires the adaptive schedule")
    if options.record_noise and not problem.has_full_gradient:
        raise CapabilityError("noise recording requires an exact gradient")


def run(problem, options: SolverOptions | None = None, schedule: SamplingSchedule | None = None,
        stream: RandomStream | None = None, x_star=None) -> list[IterationRecord]:
    """Run one solver path and return one record per iterate ``x_0, x_1, ...``.

    Record ``n`` describes ``x_n`` (objective, squared distance to ``x_star``)
    and the batch drawn at ``y_n`` (size ``K_n``, cumulative ``Gamma_n``, and
    ``||G_hat(y_n)||``).  The run stops after ``max_iterations`` updates, or
    earlier when the gradient-mapping norm falls below ``stop_gmap_tol`` or
    the sample budget is spent.
    """
    options = options or SolverOptions()
    if schedule is None and options.algorithm != "full_gradient_accel":
        schedule = SamplingSchedule.adaptive()
    _validate(problem, options, schedule)
    if stream is None:
        stream = RandomStream(0, 0)
    if x_star is None:
        x_star = problem.x_star
    x_star = None if x_star is None else as_vector(x_star, problem.dim, "x_star")

    alpha = step_size(problem, schedule, options)
    q = problem.mu * alpha
    if q > 1.0 + 1e-12:
        raise ValueError(f"mu * alpha = {q} exceeds 1; step size too large")
    q = min(q, 1.0)
    x0 = np.zeros(problem.dim) if options.x0 is None else as_vector(options.x0, problem.dim, "x0")
    state = SolverState(x_curr=x0.copy(), x_prev=x0.copy(), y=x0.copy(),
                        pi=math.sqrt(q) if options.mode == "strongly_convex" else options.pi0,
                        alpha=alpha, q=q)
    beta = constant_momentum(q)
    algo = options.algorithm
    exact = algo == "full_gradient_accel"
    adaptive = not exact and schedule.kind == "adaptive"
    carry = schedule.params.k_initial if adaptive else 0
    budget = options.sample_budget
    has_value = problem.has_smooth_value
    records = []
    t0 = time.perf_counter_ns()

    for n in range(options.max_iterations + 1):
        state.n = n
        x = state.x_curr
        objective = problem.objective(x) if has_value else None
        dist_sq = float((x - x_star) @ (x - x_star)) if x_star is not None else None
        remaining = None if budget is None else budget - state.cum_samples
        if remaining is not None and remaining < (2 if adaptive else 1):
            records.append(IterationRecord(n, 0, state.cum_samples, objective, dist_sq, math.nan,
                                           0, True, time.perf_counter_ns() - t0,
                                           x=x.copy() if options.record_iterates else None))
            break

        y = state.y
        rounds, capped = 1, False
        if exact:
            grad = problem.full_gradient(y)
            gmap = gradient_mapping(problem, y, grad, alpha)
            k = 0
        else:
            if adaptive:
                batch, carry = adaptive_acquire(problem, y, alpha, schedule.params, carry, stream,
                                                k_limit=remaining)
                rounds, capped = batch.rounds, batch.budget_capped
            else:
                k = schedule_size(schedule, n)
                if remaining is not None and k > remaining:
                    k, capped = remaining, True
                batch = schedule_acquire(problem, y, alpha, k, stream)
            grad, gmap, k = batch.mean, batch.gmap, batch.size
        state.cum_samples += k
        gnorm = float(np.linalg.norm(gmap))
        noise = None
        if options.record_noise and not exact:
            noise = grad - problem.full_gradient(y)
        records.append(IterationRecord(
            n=n, batch_size=k, cum_samples=state.cum_samples, objective=objective,
            dist_sq=dist_sq, gmap_norm=gnorm, test_rounds=rounds, budget_capped=capped,
            elapsed_ns=time.perf_counter_ns() - t0, noise=noise,
            x=x.copy() if options.record_iterates else None))

        if options.stop_gmap_tol is not None and gnorm <= options.stop_gmap_tol:
            break
        if n == options.max_iterations:
            break

        x_new = problem.prox(y - alpha * grad, alpha)
        if algo == "prox_gradient":
            m = 0.0
        elif options.mode == "strongly_convex":
            m = beta
        else:
            p_new = pi_next(state.pi, q)
            m = momentum_coeff(state.pi, p_new)
            state.pi = p_new
        state.y = x_new + m * (x_new - x)
        state.x_prev, state.x_curr = x, x_new
        if not np.all(np.isfinite(state.y)):
            raise FloatingPointError(f"iterate diverged at n={n}")
    return records


def solve_oracle(problem, max_iter: int = 100_000, tol: float = 1e-10, x0=None) -> np.ndarray:
    """Minimize with exact gradients until ``||G_{1/L}(x)|| <= tol``.

    Raises :class:`OracleConvergenceError` (carrying the last iterate and its
    gradient-mapping norm) when ``max_iter`` is exhausted.
    """
    if not problem.has_full_gradient:
        raise CapabilityError("the oracle needs an exact gradient")
    alpha = 1.0 / problem.lipschitz
    q = min(problem.mu * alpha, 1.0)
    x = np.zeros(problem.dim) if x0 is None else as_vector(x0, problem.dim, "x0")
    y, pi, gnorm = x.copy(), 1.0, math.inf
    for _ in range(max_iter + 1):
        gnorm = float(np.linalg.norm(gradient_mapping(problem, x, problem.full_gradient(x), alpha)))
        if gnorm <= tol:
            return x
        x_new = problem.prox(y - alpha * problem.full_gradient(y), alpha)
        p_new = pi_next(pi, q)
        y = x_new + momentum_coeff(pi, p_new) * (x_new - x)
        x, pi = x_new, p_new
    raise OracleConvergenceError(gnorm, x, max_iter)
