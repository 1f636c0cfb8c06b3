"""Post-hoc statistics over replication ensembles and the rate constants used
to check them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


# -- theoretical constants ---------------------------------------------------

def rho(mu, L, theta, nu):
    """Geometric contraction factor ``1 - sqrt(mu / (L (theta^2 + nu^2 + 1)))``."""
    return 1.0 - math.sqrt(mu / (L * (theta**2 + nu**2 + 1.0)))


def constant_c1(F0, F_star, L, dist0_sq):
    return F0 - F_star + 0.5 * L * dist0_sq


def constant_c2(F0, F_star, mu, dist0_sq):
    return 2.0 / mu * (F0 - F_star + 0.5 * mu * dist0_sq)


def strongly_convex_envelope(n, c2, r):
    return c2 * np.power(r, np.asarray(n, dtype=np.float64))


def convex_envelope(n, c1, theta, nu):
    s = theta**2 + nu**2 + 1.0
    n = np.asarray(n, dtype=np.float64)
    return 4.0 * s * c1 / (2.0 * math.sqrt(s) + n) ** 2


# -- ensembles ----------------------------------------------------------------

class DiagnosticError(ValueError):
    """A diagnostic's precondition is not met by the ensemble."""


@dataclass
class ReplicationEnsemble:
    """Per-iteration arrays of shape ``(M, T)`` (or ``(M, T, d)``) across ``M`` paths.

    Build from solver output with :meth:`from_runs`.  Missing quantities are
    NaN-filled arrays or None.
    """

    batch_size: np.ndarray
    cum_samples: np.ndarray
    objective: np.ndarray | None
    dist_sq: np.ndarray | None
    iterates: np.ndarray | None = None
    noise: np.ndarray | None = None
    x_star: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_replications(self) -> int:
        return self.cum_samples.shape[0]

    @property
    def n_iterations(self) -> int:
        return self.cum_samples.shape[1]

    @classmethod
    def from_runs(cls, runs, x_star=None, **meta):
        lengths = {len(r) for r in runs}
        if len(lengths) != 1:
            raise ValueError("all replications must share the iteration count")

        def grab(attr):
            vals = [[getattr(rec, attr) for rec in r] for r in runs]
            if any(v is None for row in vals for v in row):
                return None
            return np.array(vals, dtype=np.float64)

        def stack(attr):
            if any(getattr(rec, attr) is None for r in runs for rec in r):
                return None
            return np.array([[getattr(rec, attr) for rec in r] for r in runs])

        return cls(batch_size=grab("batch_size"), cum_samples=grab("cum_samples"),
                   objective=grab("objective"), dist_sq=grab("dist_sq"),
                   iterates=stack("x"), noise=stack("noise"),
                   x_star=None if x_star is None else np.asarray(x_star, dtype=np.float64),
                   meta=meta)

    def _require_dist(self):
        if self.dist_sq is not None:
            return self.dist_sq
        if self.iterates is not None and self.x_star is not None:
            err = self.iterates - self.x_star
            return np.einsum("mtd,mtd->mt", err, err)
        raise DiagnosticError("the optimum x_star is unknown for this ensemble")


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    theoretical_slope: float

    @property
    def ratio(self) -> float:
        return self.slope / self.theoretical_slope


def rmse_curve(ens: ReplicationEnsemble):
    d = ens._require_dist()
    rmse = np.sqrt(d.mean(axis=0))
    return list(zip(range(len(rmse)), rmse.tolist()))


def rate_fit(curve, window, rho_value) -> RateFit:
    """OLS fit of ``log RMSE_n`` against ``n`` over ``window = (n_lo, n_hi)`` inclusive."""
    lo, hi = window
    pts = [(n, v) for n, v in curve if lo <= n <= hi]
    if len(pts) < 2:
        raise DiagnosticError("rate fit needs at least two points in the window")
    n = np.array([p[0] for p in pts], dtype=np.float64)
    v = np.array([p[1] for p in pts], dtype=np.float64)
    if np.any(v <= 0):
        raise DiagnosticError("RMSE is zero inside the fit window")
    y = np.log(v)
    A = np.column_stack([n, np.ones_like(n)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(np.sum((y - A @ np.array([slope, intercept])) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return RateFit(float(slope), float(intercept), r2, 0.5 * math.log(rho_value))


def covariance_gap_curve(ens: ReplicationEnsemble, rho_value, max_dim=200):
    """Frobenius gaps ``||W_{n+1} - W_n||`` of ``W_n = rho^-n mean_j w_n w_n^T``."""
    if ens.noise is None:
        raise DiagnosticError("gradient noise was not recorded")
    w = ens.noise
    if w.shape[2] > max_dim:
        raise DiagnosticError(f"dimension {w.shape[2]} exceeds the covariance guard {max_dim}")
    M, T, _ = w.shape
    W = np.einsum("mti,mtj->tij", w, w) / M
    W *= np.power(rho_value, -np.arange(T, dtype=np.float64))[:, None, None]
    gaps = np.linalg.norm(W[1:] - W[:-1], axis=(1, 2))
    return list(zip(range(T - 1), gaps.tolist()))


def scaled_errors(ens: ReplicationEnsemble, n, alpha, rho_value):
    """``alpha^-1 rho^(-n/2) (x_n - x*, x_{n-1} - x*)`` per path, shape ``(M, 2d)``.

    ``x_{-1}`` is taken to be ``x*``.
    """
    if ens.iterates is None:
        raise DiagnosticError("iterates were not recorded")
    if ens.x_star is None:
        raise DiagnosticError("the optimum x_star is unknown for this ensemble")
    cur = ens.iterates[:, n] - ens.x_star
    prev = ens.iterates[:, n - 1] - ens.x_star if n >= 1 else np.zeros_like(cur)
    return np.hstack([cur, prev]) / (alpha * rho_value ** (n / 2.0))


@dataclass
class NormalityReport:
    n_terminal: int
    n_replications: int
    components: list
    mean: np.ndarray
    variance: np.ndarray
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    skew_pass: np.ndarray
    kurt_pass: np.ndarray
    covariance: np.ndarray
    min_eigenvalue: float
    stabilization_gap: float | None

    @property
    def component_pass(self):
        return self.skew_pass & self.kurt_pass


def moment_flags(z):
    """Skewness and excess kurtosis per column with 4-standard-error flags."""
    z = np.asarray(z, dtype=np.float64)
    M = z.shape[0]
    c = z - z.mean(axis=0)
    m2 = (c**2).mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        skew = np.where(m2 > 0, (c**3).mean(axis=0) / m2**1.5, 0.0)
        kurt = np.where(m2 > 0, (c**4).mean(axis=0) / m2**2 - 3.0, 0.0)
    return skew, kurt, np.abs(skew) <= 4 * math.sqrt(6 / M), np.abs(kurt) <= 4 * math.sqrt(24 / M)


def normality_report(ens: ReplicationEnsemble, n_terminal, components=None, alpha=None,
                     rho_value=None, min_replications=200, lag=25) -> NormalityReport:
    """Moment-based normality flags for the scaled error at ``n_terminal``.

    Also returns the empirical covariance of the full scaled vector, its
    smallest eigenvalue, and the relative Frobenius gap between covariance
    estimates at ``n_terminal - lag`` and ``n_terminal``.
    """
    M = ens.n_replications
    if M < min_replications:
        raise DiagnosticError(f"normality diagnostics need >= {min_replications} replications, got {M}")
    alpha = ens.meta["alpha"] if alpha is None else alpha
    rho_value = ens.meta["rho"] if rho_value is None else rho_value
    z = scaled_errors(ens, n_terminal, alpha, rho_value)
    if components is None:
        components = list(range(z.shape[1]))
    sel = z[:, components]
    skew, kurt, sp, kp = moment_flags(sel)
    cov = np.atleast_2d(np.cov(z, rowvar=False))
    gap = None
    if n_terminal - lag >= 0:
        cov_lag = np.atleast_2d(np.cov(scaled_errors(ens, n_terminal - lag, alpha, rho_value), rowvar=False))
        gap = float(np.linalg.norm(cov - cov_lag) / np.linalg.norm(cov))
    return NormalityReport(n_terminal, M, list(components), sel.mean(axis=0), sel.var(axis=0),
                           skew, kurt, sp, kp, cov, float(np.linalg.eigvalsh(cov)[0]), gap)


def efficiency_curve(ens: ReplicationEnsemble):
    if ens.objective is None:
        raise DiagnosticError("objective values were not recorded")
    return list(zip(ens.cum_samples.mean(axis=0).tolist(), ens.objective.mean(axis=0).tolist()))


def sample_complexity_check(ens: ReplicationEnsemble):
    d = ens._require_dist()
    prod = np.median(ens.cum_samples * d, axis=0)
    return list(zip(range(len(prod)), prod.tolist()))
