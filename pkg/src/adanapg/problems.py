"""Benchmark problems: regularized logistic regression, least squares, the
Gaussian parameter-estimation quadratic, and an orthogonal-design lasso toy."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from scipy.special import expit

from .core import CompositeProblem, RandomStream, as_vector
from .prox import Regularizer, soft_threshold


def power_iteration(M, n_iter=50, tol=1e-6):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    M = np.asarray(M, dtype=np.float64)
    v = np.ones(M.shape[0]) / np.sqrt(M.shape[0])
    lam = 0.0
    for _ in range(n_iter):
        w = M @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = float(v @ (M @ v))
        if abs(new - lam) <= tol * max(1.0, abs(new)):
            lam = new
            break
        lam = new
    return lam


def _l1_regularizer(lam):
    return Regularizer.l1(lam) if lam > 0 else Regularizer()


class FiniteSumProblem(CompositeProblem):
    """``f(x) = mean_i f_i(x)`` with ``xi`` uniform over the ``N`` data rows.

    Batches larger than ``N`` are drawn as multinomial counts over the rows,
    which is the same distribution as ``k`` uniform index draws but costs
    ``O(N d)`` however large ``k`` is.
    """

    def example_gradients(self, x, idx):
        raise NotImplementedError

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    def sample_gradients(self, x, k, stream):
        idx = stream.generator.integers(0, self.n_samples, size=k)
        return self.example_gradients(x, idx)

    def draw(self, x, k, stream):
        n = self.n_samples
        if k <= n:
            return self.sample_gradients(x, k, stream), None
        counts = stream.generator.multinomial(k, np.full(n, 1.0 / n))
        idx = np.flatnonzero(counts)
        return self.example_gradients(x, idx), counts[idx]


class LogisticProblem(FiniteSumProblem):
    """``mean_i log(1 + exp(-z_i y_i.x)) + lambda1/2 ||x||^2 + lambda2 ||x||_1``.

    The ``lambda1`` term is smooth and belongs to ``f``; only the l1 term is
    the prox part ``h``.
    """

    def __init__(self, features, labels, lambda1=0.0, lambda2=0.0, lipschitz=None):
        Y = np.asarray(features, dtype=np.float64)
        z = np.asarray(labels, dtype=np.float64)
        if Y.ndim != 2 or Y.shape[0] == 0:
            raise ValueError("features must be a nonempty 2-d array")
        if z.shape != (Y.shape[0],):
            raise ValueError("labels must have one entry per row")
        if not np.all(np.isin(z, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if lambda1 < 0 or lambda2 < 0:
            raise ValueError("regularization weights must be nonnegative")
        self.features, self.labels = Y, z
        self.lambda1, self.lambda2 = float(lambda1), float(lambda2)
        self.dim = Y.shape[1]
        if lipschitz is None:
            gram = Y.T @ Y / Y.shape[0]
            lipschitz = 0.25 * float(np.linalg.eigvalsh(gram)[-1]) + self.lambda1
        self.lipschitz = float(lipschitz)
        self.mu = self.lambda1
        self.regularizer = _l1_regularizer(self.lambda2)
        self.x_star = None
        self._check_constants()

    def example_gradients(self, x, idx):
        Yi = self.features[idx]
        zi = self.labels[idx]
        coef = -zi * expit(-zi * (Yi @ x))
        return coef[:, None] * Yi + self.lambda1 * x

    def full_gradient(self, x):
        x = np.asarray(x, dtype=np.float64)
        coef = -self.labels * expit(-self.labels * (self.features @ x))
        return coef @ self.features / self.n_samples + self.lambda1 * x

    def smooth_value(self, x):
        x = np.asarray(x, dtype=np.float64)
        margins = self.labels * (self.features @ x)
        return float(np.mean(np.logaddexp(0.0, -margins))) + 0.5 * self.lambda1 * float(x @ x)

    def decision_function(self, x, X):
        return np.asarray(X, dtype=np.float64) @ x


class LeastSquaresProblem(FiniteSumProblem):
    """``mean_i (y_i.x - z_i)^2 / 2 + lambda1/2 ||x||^2 + lambda2 ||x||_1``."""

    def __init__(self, features, targets, lambda1=0.0, lambda2=0.0):
        Y = np.asarray(features, dtype=np.float64)
        t = np.asarray(targets, dtype=np.float64)
        if Y.ndim != 2 or Y.shape[0] == 0 or t.shape != (Y.shape[0],):
            raise ValueError("need a nonempty (N, d) feature matrix and N targets")
        self.features, self.targets = Y, t
        self.lambda1, self.lambda2 = float(lambda1), float(lambda2)
        self.dim = Y.shape[1]
        eig = np.linalg.eigvalsh(Y.T @ Y / Y.shape[0])
        self.lipschitz = float(eig[-1]) + self.lambda1
        self.mu = max(float(eig[0]), 0.0) + self.lambda1
        self.regularizer = _l1_regularizer(self.lambda2)
        self.x_star = None
        self._check_constants()

    def example_gradients(self, x, idx):
        Yi = self.features[idx]
        r = Yi @ x - self.targets[idx]
        return r[:, None] * Yi + self.lambda1 * x

    def full_gradient(self, x):
        r = self.features @ x - self.targets
        return r @ self.features / self.n_samples + self.lambda1 * x

    def smooth_value(self, x):
        r = self.features @ x - self.targets
        return 0.5 * float(r @ r) / self.n_samples + 0.5 * self.lambda1 * float(x @ x)


class ParamEstimationProblem(CompositeProblem):
    """Estimate ``x_planted`` from ``l = u.x_planted + v``.

    ``u ~ Normal(0, R)``, ``v ~ Normal(0, sigma_v^2)``; ``f(x) = E[(l - u.x)^2]``
    and ``h = lam * ||x||_1``.  One draw of the gradient is
    ``2 (u u.x - l u)``, unbiased for ``2 R (x - x_planted)``.
    """

    def __init__(self, covariance, x_planted, sigma_v=1.0, lam=0.0):
        R = np.asarray(covariance, dtype=np.float64)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError("covariance must be square")
        if not np.allclose(R, R.T):
            raise ValueError("covariance must be symmetric")
        try:
            self._chol = np.linalg.cholesky(R)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance is not positive definite") from exc
        self.covariance = R
        self.dim = R.shape[0]
        self.x_planted = as_vector(x_planted, self.dim, "x_planted")
        if sigma_v < 0 or lam < 0:
            raise ValueError("sigma_v and lam must be nonnegative")
        self.sigma_v, self.lam = float(sigma_v), float(lam)
        eig = np.linalg.eigvalsh(R)
        self.mu, self.lipschitz = 2.0 * float(eig[0]), 2.0 * float(eig[-1])
        self.regularizer = _l1_regularizer(self.lam)
        self.x_star = self.x_planted.copy() if self.lam == 0 else None
        self._check_constants()

    def sample_gradients(self, x, k, stream):
        gen = stream.generator
        u = gen.standard_normal((k, self.dim)) @ self._chol.T
        v = self.sigma_v * gen.standard_normal(k)
        # 2 (u u.x - l u) with l = u.x_planted + v
        resid = u @ (np.asarray(x) - self.x_planted) - v
        return 2.0 * resid[:, None] * u

    def full_gradient(self, x):
        return 2.0 * self.covariance @ (np.asarray(x, dtype=np.float64) - self.x_planted)

    def smooth_value(self, x):
        d = np.asarray(x, dtype=np.float64) - self.x_planted
        return float(d @ self.covariance @ d) + self.sigma_v**2


class LassoToyProblem(CompositeProblem):
    """``1/2 ||Q x - b||^2 + lam ||x||_1`` with orthogonal ``Q``.

    The minimizer is ``soft_threshold(Q^T b, lam)``.  Sampled gradients add
    isotropic Gaussian noise of standard deviation ``noise_std``.
    """

    def __init__(self, Q, b, lam, noise_std=0.0):
        Q = np.asarray(Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if not np.allclose(Q.T @ Q, np.eye(Q.shape[0]), atol=1e-10):
            raise ValueError("Q must be orthogonal")
        if not lam > 0:
            raise ValueError("lam must be positive")
        self.Q, self.b = Q, as_vector(b, Q.shape[0], "b")
        self.lam, self.noise_std = float(lam), float(noise_std)
        self.dim = Q.shape[0]
        self.lipschitz = self.mu = 1.0
        self.regularizer = Regularizer.l1(self.lam)
        self._qtb = Q.T @ self.b
        self.x_star = soft_threshold(self._qtb, self.lam)

    def full_gradient(self, x):
        return np.asarray(x, dtype=np.float64) - self._qtb

    def smooth_value(self, x):
        r = self.Q @ np.asarray(x, dtype=np.float64) - self.b
        return 0.5 * float(r @ r)

    def sample_gradients(self, x, k, stream):
        g = np.broadcast_to(self.full_gradient(x), (k, self.dim))
        if self.noise_std == 0.0:
            return g.copy()
        return g + self.noise_std * stream.generator.standard_normal((k, self.dim))


class QuadraticProblem(CompositeProblem):
    """``1/2 x.A x - b.x + h(x)`` with optional additive Gaussian gradient noise."""

    def __init__(self, A, b, regularizer=None, noise_std=0.0):
        A = np.asarray(A, dtype=np.float64)
        self.A, self.b = A, as_vector(b, A.shape[0], "b")
        self.dim = A.shape[0]
        eig = np.linalg.eigvalsh(A)
        self.mu, self.lipschitz = max(float(eig[0]), 0.0), float(eig[-1])
        self.regularizer = regularizer or Regularizer()
        self.noise_std = float(noise_std)
        self.x_star = np.linalg.solve(A, self.b) if self.regularizer.kind == "none" and self.mu > 0 else None
        self._check_constants()

    def full_gradient(self, x):
        return self.A @ np.asarray(x, dtype=np.float64) - self.b

    def smooth_value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * float(x @ self.A @ x) - float(self.b @ x)

    def sample_gradients(self, x, k, stream):
        g = np.broadcast_to(self.full_gradient(x), (k, self.dim))
        if self.noise_std == 0.0:
            return g.copy()
        return g + self.noise_std * stream.generator.standard_normal((k, self.dim))


# -- generators -----------------------------------------------------------

def make_logistic(n_samples=200, dim=20, lambda1=None, lambda2=None, label_noise=0.1, seed=0):
    """Synthetic logistic data: features ``Normal(0, I / sqrt(d))``, labels from a
    planted separator with a fraction ``label_noise`` flipped.

    ``lambda1`` and ``lambda2`` default to ``1 / n_samples``.
    """
    gen = RandomStream(seed, 0).generator
    Y = gen.standard_normal((n_samples, dim)) * dim ** -0.25
    w = gen.standard_normal(dim)
    z = np.where(Y @ w >= 0, 1.0, -1.0)
    flip = gen.random(n_samples) < label_noise
    z[flip] = -z[flip]
    lam1 = 1.0 / n_samples if lambda1 is None else lambda1
    lam2 = 1.0 / n_samples if lambda2 is None else lambda2
    return LogisticProblem(Y, z, lam1, lam2)


def make_covariance(dim, condition_number=10.0, largest=1.0, seed=0):
    """Random SPD matrix with geometrically spaced eigenvalues in ``[largest / cond, largest]``."""
    gen = RandomStream(seed, 0).generator
    Q, _ = np.linalg.qr(gen.standard_normal((dim, dim)))
    if dim == 1:
        eig = np.array([largest])
    else:
        eig = largest * condition_number ** (-np.arange(dim) / (dim - 1))
    return (Q * eig) @ Q.T


def make_param_estimation(dim=10, condition_number=10.0, sigma_v=1.0, lam=0.0, seed=0):
    gen = RandomStream(seed, 1).generator
    R = make_covariance(dim, condition_number, seed=seed)
    x_planted = gen.standard_normal(dim)
    return ParamEstimationProblem(R, x_planted, sigma_v=sigma_v, lam=lam)


def make_lasso_toy(dim=5, lam=0.5, noise_std=1.0, seed=0):
    gen = RandomStream(seed, 0).generator
    Q, _ = np.linalg.qr(gen.standard_normal((dim, dim)))
    b = 2.0 * gen.standard_normal(dim)
    return LassoToyProblem(Q, b, lam, noise_std=noise_std)


# -- dataset loading --------------------------------------------------------

def _normalize_labels(raw, where):
    out = []
    for value, line in zip(raw, where):
        if value in (1.0,):
            out.append(1.0)
        elif value in (-1.0, 0.0):
            out.append(-1.0)
        else:
            raise ValueError(f"line {line}: label {value!r} is not in {{-1, +1, 0, 1}}")
    return np.array(out)


def _read_csv(path):
    rows, labels, lines = [], [], []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or rec[0].startswith("#"):
                continue
            try:
                vals = [float(v) for v in rec]
            except ValueError:
                if not rows and lineno == 1:
                    continue  # header row
                raise ValueError(f"line {lineno}: cannot parse {rec!r}") from None
            if rows and len(vals) != len(rows[0]) + 1:
                raise ValueError(f"line {lineno}: expected {len(rows[0]) + 1} fields, got {len(vals)}")
            if len(vals) < 2:
                raise ValueError(f"line {lineno}: need at least one feature and a label")
            rows.append(vals[:-1])
            labels.append(vals[-1])
            lines.append(lineno)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.array(rows), labels, lines


def _read_svmlight(path):
    entries, labels, lines = [], [], []
    width = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            head, *pairs = text.split()
            try:
                labels.append(float(head))
                row = {}
                for p in pairs:
                    i, v = p.split(":")
                    i = int(i)
                    if i < 1:
                        raise ValueError("indices are 1-based")
                    row[i - 1] = float(v)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            if row:
                width = max(width, max(row) + 1)
            entries.append(row)
            lines.append(lineno)
    if not entries:
        raise ValueError(f"{path}: no data rows")
    X = np.zeros((len(entries), width))
    for r, row in enumerate(entries):
        for c, v in row.items():
            X[r, c] = v
    return X, labels, lines


def load_sparse_dataset(path, fmt=None, lambda1=0.0, lambda2=0.0) -> LogisticProblem:
    """Load a CSV (last column = label) or svmlight file into a logistic problem.

    Labels in ``{0, 1}`` are mapped to ``{-1, +1}``.  ``L`` is estimated by
    50 power iterations on ``Y^T Y / N``.
    """
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "svmlight"
    if fmt == "csv":
        X, raw, lines = _read_csv(path)
    elif fmt == "svmlight":
        X, raw, lines = _read_svmlight(path)
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")
    z = _normalize_labels(raw, lines)
    lam_max = power_iteration(X.T @ X / X.shape[0], n_iter=50, tol=1e-6)
    return LogisticProblem(X, z, lambda1, lambda2, lipschitz=0.25 * lam_max + lambda1)
