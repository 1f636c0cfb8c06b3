"""Closed-form proximal operators and the (sample) gradient mapping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("none", "l1", "l2_squared", "elastic_net")


@dataclass(frozen=True)
class Regularizer:
    """Nonsmooth term ``h`` drawn from a closed catalog.

    ``l1``: ``lam1 * ||x||_1``; ``l2_squared``: ``lam2 / 2 * ||x||^2``;
    ``elastic_net``: the sum of both.
    """

    kind: str = "none"
    lam1: float = 0.0
    lam2: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}; expected one of {KINDS}")
        if self.lam1 < 0 or self.lam2 < 0:
            raise ValueError("regularization weights must be nonnegative")

    @classmethod
    def l1(cls, lam):
        return cls("l1", lam1=float(lam))

    @classmethod
    def l2_squared(cls, lam):
        return cls("l2_squared", lam2=float(lam))

    @classmethod
    def elastic_net(cls, lam1, lam2):
        return cls("elastic_net", lam1=float(lam1), lam2=float(lam2))

    def value(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "none":
            return 0.0
        out = 0.0
        if self.kind in ("l1", "elastic_net"):
            out += self.lam1 * float(np.abs(x).sum())
        if self.kind in ("l2_squared", "elastic_net"):
            out += 0.5 * self.lam2 * float(x @ x)
        return out


def soft_threshold(x, t):
    """Componentwise ``sign(x) * max(|x| - t, 0)``; ties ``|x| == t`` map to 0."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def prox_apply(reg: Regularizer, x, step: float) -> np.ndarray:
    """Return ``argmin_u { step * h(u) + 0.5 * ||u - x||^2 }``."""
    if not step > 0:
        raise ValueError(f"prox step must be positive, got {step}")
    x = np.asarray(x, dtype=np.float64)
    if reg.kind == "none":
        return x.copy()
    if reg.kind == "l1":
        return soft_threshold(x, step * reg.lam1)
    if reg.kind == "l2_squared":
        return x / (1.0 + step * reg.lam2)
    return soft_threshold(x, step * reg.lam1) / (1.0 + step * reg.lam2)


def gradient_mapping(problem, x, grad_at_x, alpha: float) -> np.ndarray:
    """``(x - prox_{alpha h}(x - alpha * grad_at_x)) / alpha``.

    With the exact gradient this is the gradient mapping, which vanishes
    exactly at minimizers of ``f + h``; with an estimated gradient it is the
    sample gradient mapping.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    grad_at_x = np.asarray(grad_at_x, dtype=np.float64)
    if grad_at_x.shape != x.shape:
        raise ValueError(f"gradient shape {grad_at_x.shape} does not match point shape {x.shape}")
    return (x - problem.prox(x - alpha * grad_at_x, alpha)) / alpha
