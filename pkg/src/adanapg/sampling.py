"""Batch-size control: the adaptive inner-product/orthogonality controller and
deterministic GEOM / POLY / fixed schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .prox import gradient_mapping


@dataclass(frozen=True)
class AdaptiveTestParams:
    theta: float = 0.9
    nu: float = 5.5
    k_initial: int = 2
    k_max: int = 10**6
    max_augment_rounds: int = 10
    gmap_floor: float = 1e-16

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.k_initial < 2:
            raise ValueError("k_initial must be at least 2")
        if self.k_max < self.k_initial:
            raise ValueError("k_max must be >= k_initial")
        if self.max_augment_rounds < 1:
            raise ValueError("max_augment_rounds must be >= 1")
        if self.gmap_floor < 0:
            raise ValueError("gmap_floor must be nonnegative")

    @property
    def inflation(self) -> float:
        """``theta**2 + nu**2 + 1``, the factor dividing ``1/L`` in the step size."""
        return self.theta**2 + self.nu**2 + 1.0


@dataclass
class GradientBatch:
    """Gradient draws at ``point`` plus the statistics the tests need.

    ``atoms`` holds distinct draws and ``weights`` their integer multiplicities
    (all ones for plainly materialized draws), so ``size == weights.sum()``.
    """

    point: np.ndarray
    atoms: np.ndarray
    weights: np.ndarray
    mean: np.ndarray
    size: int
    v1: float
    v2: float
    gmap: np.ndarray
    gmap_norm_sq: float
    rounds: int = 1
    passed: bool = True
    budget_capped: bool = False

    @property
    def samples(self) -> np.ndarray:
        """Every draw in order, expanding multiplicities."""
        return np.repeat(self.atoms, self.weights, axis=0)


def _weights(atoms, weights):
    if weights is None:
        return np.ones(atoms.shape[0], dtype=np.int64)
    return np.asarray(weights, dtype=np.int64)


def _stats(atoms, weights, size):
    """Sample mean and the projection / orthogonal-residual variances."""
    wf = weights.astype(np.float64)
    mean = (wf @ atoms) / size
    if size < 2:
        return mean, math.nan, math.nan
    gnorm = float(np.linalg.norm(mean))
    if gnorm == 0.0:
        v1 = 0.0
        v2 = float(wf @ np.einsum("ij,ij->i", atoms, atoms)) / (size - 1)
        return mean, v1, v2
    unit = mean / gnorm
    proj = atoms @ unit
    v1 = float(wf @ (proj - gnorm) ** 2) / (size - 1)
    resid = atoms - np.outer(proj, unit)
    v2 = float(wf @ np.einsum("ij,ij->i", resid, resid)) / (size - 1)
    return mean, v1, v2


def _build(problem, y, atoms, weights, alpha, need_stats=True):
    weights = _weights(atoms, weights)
    size = int(weights.sum())
    if need_stats and size < 2:
        raise ValueError("batch statistics need at least 2 samples")
    mean, v1, v2 = _stats(atoms, weights, size)
    gmap = gradient_mapping(problem, y, mean, alpha)
    return GradientBatch(point=y, atoms=atoms, weights=weights, mean=mean, size=size,
                         v1=v1, v2=v2, gmap=gmap, gmap_norm_sq=float(gmap @ gmap))


def batch_statistics(samples, y, problem, alpha, weights=None) -> GradientBatch:
    """Summarize a batch of gradient draws taken at ``y``.

    Parameters
    ----------
    samples : array of shape (m, d)
        Gradient draws (or distinct atoms when ``weights`` is given).
    y : array of shape (d,)
        Point the draws were taken at.
    problem : CompositeProblem
        Supplies the prox used by the sample gradient mapping.
    alpha : float
        Step size of the gradient mapping.
    weights : array of int, optional
        Multiplicity of each row of ``samples``.

    Returns
    -------
    GradientBatch
        ``v1`` is the sample variance of the projection lengths
        ``g_i . u`` around ``||g_hat||`` (``u = g_hat / ||g_hat||``) and ``v2``
        the sample mean-squared residual orthogonal to ``g_hat``, both with
        denominator ``K - 1``.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    return _build(problem, y, samples, weights, alpha)


def passes_tests(batch: GradientBatch, params: AdaptiveTestParams) -> bool:
    if batch.gmap_norm_sq <= params.gmap_floor:
        return True
    g = batch.gmap_norm_sq
    return (batch.v1 / batch.size <= params.theta**2 * g
            and batch.v2 / batch.size <= params.nu**2 * g)


def required_size(batch: GradientBatch, params: AdaptiveTestParams) -> int:
    g = max(batch.gmap_norm_sq, params.gmap_floor)
    need = max(batch.v1 / (params.theta**2 * g), batch.v2 / (params.nu**2 * g))
    if not math.isfinite(need):
        return params.k_max
    return int(math.ceil(need))


def adaptive_acquire(problem, y, alpha, params: AdaptiveTestParams, carry_k: int, stream,
                     k_limit: int | None = None):
    """Draw a batch at ``y`` large enough to pass both variance tests.

    Starts from ``carry_k`` draws.  While a test fails, the batch grows in one
    step to the size implied by the current variance estimates (clamped to
    ``k_max``), keeping every earlier draw.  Returns ``(batch, carry_out)``
    where ``carry_out`` is the final size, used as the next starting size.

    ``k_limit`` further caps the size (remaining sample budget); hitting either
    cap with a failing test sets ``budget_capped``.
    """
    cap = params.k_max if k_limit is None else min(params.k_max, k_limit)
    k = min(carry_k, cap)
    if k < 2:
        raise ValueError("adaptive acquisition needs room for at least 2 samples")
    atoms, weights = problem.draw(y, k, stream)
    batch = _build(problem, y, atoms, weights, alpha)
    rounds = 1
    while not passes_tests(batch, params):
        if batch.size >= cap:
            batch.budget_capped = True
            break
        if rounds > params.max_augment_rounds:
            break
        k_new = min(max(required_size(batch, params), batch.size + 1), cap)
        extra, extra_w = problem.draw(y, k_new - batch.size, stream)
        atoms = np.concatenate([batch.atoms, extra])
        weights = np.concatenate([batch.weights, _weights(extra, extra_w)])
        batch = _build(problem, y, atoms, weights, alpha)
        rounds += 1
    batch.rounds = rounds
    batch.passed = passes_tests(batch, params)
    return batch, batch.size


def population_tests(batch_mean_samples, true_grad, true_gmap_norm_sq, theta, nu):
    """Evaluate the population tests with known ``grad f(y)`` and ``G(y)``.

    ``batch_mean_samples`` is an ``(R, d)`` array of independent batch means
    at the same point; the conditional expectations are replaced by averages
    over the ``R`` replicates.  Returns ``(lhs1, lhs2, ok1, ok2)``.
    """
    gm = np.atleast_2d(np.asarray(batch_mean_samples, dtype=np.float64))
    g = np.asarray(true_grad, dtype=np.float64)
    gn = float(np.linalg.norm(g))
    proj = gm @ g / gn
    lhs1 = float(np.mean((proj - gn) ** 2))
    resid = gm - np.outer(gm @ g / gn**2, g)
    lhs2 = float(np.mean(np.einsum("ij,ij->i", resid, resid)))
    return lhs1, lhs2, lhs1 <= theta**2 * true_gmap_norm_sq, lhs2 <= nu**2 * true_gmap_norm_sq


# -- deterministic schedules ---------------------------------------------

@dataclass(frozen=True)
class SamplingSchedule:
    """Either the adaptive controller or a deterministic batch-size sequence.

    ``geometric``: ``ceil(k0 * (1 + gamma) ** n)``;
    ``polynomial``: ``ceil(k0 * n ** gamma)`` (``n = 0`` gives ``k0``);
    ``fixed``: ``k0`` every iteration.
    """

    kind: str = "adaptive"
    params: AdaptiveTestParams = field(default_factory=AdaptiveTestParams)
    k0: int = 2
    gamma: float = 0.0
    k_max: int | None = None

    def __post_init__(self):
        if self.kind not in ("adaptive", "geometric", "polynomial", "fixed"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind != "adaptive":
            if self.k0 < 1:
                raise ValueError("k0 must be >= 1")
            if self.kind in ("geometric", "polynomial") and not self.gamma > 0:
                raise ValueError("gamma must be positive")

    @classmethod
    def adaptive(cls, params=None, **kw):
        return cls("adaptive", params=params or AdaptiveTestParams(**kw))

    @classmethod
    def geometric(cls, k0, gamma1, k_max=None):
        return cls("geometric", k0=int(k0), gamma=float(gamma1), k_max=k_max)

    @classmethod
    def polynomial(cls, k0, gamma2, k_max=None):
        return cls("polynomial", k0=int(k0), gamma=float(gamma2), k_max=k_max)

    @classmethod
    def fixed(cls, k):
        return cls("fixed", k0=int(k))


def schedule_size(schedule: SamplingSchedule, n: int) -> int:
    if schedule.kind == "adaptive":
        raise ValueError("the adaptive schedule has no closed-form size")
    if n < 0:
        raise ValueError("iteration index must be nonnegative")
    if schedule.kind == "fixed":
        return schedule.k0
    if schedule.kind == "geometric":
        raw = schedule.k0 * (1.0 + schedule.gamma) ** n
    else:
        raw = schedule.k0 * float(n) ** schedule.gamma if n >= 1 else float(schedule.k0)
    # round away representation noise (e.g. 2.0000000000000004) before ceil
    k = max(1, math.ceil(round(raw, 9)))
    if schedule.k_max is not None:
        k = min(k, schedule.k_max)
    return k


def schedule_acquire(problem, y, alpha, k, stream):
    """Draw exactly ``k`` samples; statistics are filled in only when ``k >= 2``."""
    atoms, weights = problem.draw(y, k, stream)
    return _build(problem, y, atoms, weights, alpha, need_stats=False)
