"""Vector helpers, seeded random streams and the composite problem contract."""

from __future__ import annotations

import numpy as np

from .prox import Regularizer, prox_apply

_MASK64 = (1 << 64) - 1


class CapabilityError(RuntimeError):
    """Raised when a problem lacks an optional capability (exact gradient, value)."""


def as_vector(x, dim=None, name="x"):
    """Return ``x`` as a finite 1-d float64 array, optionally checking its length."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{name} contains non-finite entries")
    return arr


def dot(a, b) -> float:
    a = as_vector(a, name="a")
    b = as_vector(b, name="b")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(a @ b)


def norm(a) -> float:
    return float(np.linalg.norm(as_vector(a, name="a")))


class RandomStream:
    """Counter-based random stream keyed by ``(base_seed, replication)``.

    The Philox key is the 128-bit integer ``replication << 64 | base_seed``, so
    every replication owns a disjoint keyed sequence and results do not depend
    on the order in which replications are scheduled.  The bit generator
    counter plays the role of the draw counter and is part of the serialized
    state.
    """

    def __init__(self, base_seed: int, replication: int = 0):
        if replication < 0:
            raise ValueError("replication index must be nonnegative")
        self.base_seed = int(base_seed)
        self.replication = int(replication)
        key = (self.replication << 64) | (self.base_seed & _MASK64)
        self._bitgen = np.random.Philox(key=key)
        self.generator = np.random.Generator(self._bitgen)

    @property
    def draw_counter(self) -> int:
        c = self._bitgen.state["state"]["counter"]
        return int(c[0]) | (int(c[1]) << 64)

    def to_dict(self) -> dict:
        st = self._bitgen.state
        return {
            "base_seed": self.base_seed,
            "replication": self.replication,
            "counter": [int(v) for v in st["state"]["counter"]],
            "buffer": [int(v) for v in st["buffer"]],
            "buffer_pos": int(st["buffer_pos"]),
            "has_uint32": int(st["has_uint32"]),
            "uinteger": int(st["uinteger"]),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RandomStream":
        stream = cls(data["base_seed"], data["replication"])
        st = stream._bitgen.state
        st["state"]["counter"] = np.array(data["counter"], dtype=np.uint64)
        st["buffer"] = np.array(data["buffer"], dtype=np.uint64)
        st["buffer_pos"] = data["buffer_pos"]
        st["has_uint32"] = data["has_uint32"]
        st["uinteger"] = data["uinteger"]
        stream._bitgen.state = st
        return stream

    def __repr__(self):
        return (f"RandomStream(base_seed={self.base_seed}, "
                f"replication={self.replication}, counter={self.draw_counter})")


def derive_stream(base_seed: int, replication: int = 0) -> RandomStream:
    return RandomStream(base_seed, replication)


class CompositeProblem:
    """Minimize ``F(x) = f(x) + h(x)`` with ``f = E[f(x; xi)]`` accessed by sampling.

    Subclasses implement :meth:`sample_gradients`.  ``full_gradient`` and
    ``smooth_value`` are optional; the base implementations raise
    :class:`CapabilityError`.  ``h`` defaults to the closed-form catalog in
    :mod:`adanapg.prox`; override :meth:`prox` and :meth:`nonsmooth_value`
    together for a custom regularizer.
    """

    dim: int
    lipschitz: float
    mu: float = 0.0
    regularizer: Regularizer = Regularizer()
    x_star: np.ndarray | None = None

    def _check_constants(self):
        if not self.lipschitz > 0:
            raise ValueError("lipschitz constant must be positive")
        if not 0 <= self.mu <= self.lipschitz:
            raise ValueError("need 0 <= mu <= lipschitz")

    # -- sampling -------------------------------------------------------
    def sample_gradients(self, x: np.ndarray, k: int, stream: RandomStream) -> np.ndarray:
        """Return ``k`` i.i.d. draws of ``g(x, xi)`` stacked as a ``(k, d)`` array."""
        raise NotImplementedError

    def sample_gradient(self, x, stream):
        return self.sample_gradients(x, 1, stream)[0]

    def draw(self, x, k, stream):
        """Draw ``k`` samples as ``(atoms, weights)``.

        ``weights`` is None when every row of ``atoms`` is one draw; otherwise
        it holds integer multiplicities summing to ``k``.  Finite-sum problems
        use the weighted form to represent very large batches compactly.
        """
        return self.sample_gradients(x, k, stream), None

    # -- optional exact oracles -----------------------------------------
    def full_gradient(self, x):
        raise CapabilityError(f"{type(self).__name__} has no exact gradient")

    def smooth_value(self, x):
        raise CapabilityError(f"{type(self).__name__} has no exact smooth value")

    @property
    def has_full_gradient(self) -> bool:
        return type(self).full_gradient is not CompositeProblem.full_gradient

    @property
    def has_smooth_value(self) -> bool:
        return type(self).smooth_value is not CompositeProblem.smooth_value

    # -- nonsmooth part ---------------------------------------------------
    def nonsmooth_value(self, x) -> float:
        return self.regularizer.value(x)

    def prox(self, x, step):
        return prox_apply(self.regularizer, x, step)

    def objective(self, x) -> float:
        return self.smooth_value(x) + self.nonsmooth_value(x)
