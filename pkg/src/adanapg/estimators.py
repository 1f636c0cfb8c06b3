"""scikit-learn estimators fitted by the adaptive-sampling accelerated solver.

Both estimators treat the training rows as the finite population the solver
samples from, so ``fit`` consumes per-example gradients exactly as the
benchmark problems do.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import RandomStream
from .problems import LeastSquaresProblem, LogisticProblem
from .sampling import AdaptiveTestParams, SamplingSchedule
from .solver import SolverOptions, run


class _AdaNAPGBase(BaseEstimator):

    def __init__(self, lambda1=1e-3, lambda2=0.0, theta=0.9, nu=5.5, max_iter=200,
                 k_initial=2, k_max=10**6, fit_intercept=True, mode="general",
                 sample_budget=None, random_state=0):
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.theta = theta
        self.nu = nu
        self.max_iter = max_iter
        self.k_initial = k_initial
        self.k_max = k_max
        self.fit_intercept = fit_intercept
        self.mode = mode
        self.sample_budget = sample_budget
        self.random_state = random_state

    def _design(self, X):
        if self.fit_intercept:
            return np.hstack([X, np.ones((X.shape[0], 1))])
        return X

    def _solve(self, problem):
        schedule = SamplingSchedule.adaptive(AdaptiveTestParams(
            theta=self.theta, nu=self.nu, k_initial=self.k_initial, k_max=self.k_max))
        mode = self.mode
        if mode == "strongly_convex" and not problem.mu > 0:
            raise ValueError("mode='strongly_convex' needs lambda1 > 0 or a full-rank design")
        opts = SolverOptions(max_iterations=self.max_iter, mode=mode,
                             sample_budget=self.sample_budget, record_iterates=True)
        seed = 0 if self.random_state is None else int(self.random_state)
        records = run(problem, opts, schedule, RandomStream(seed, 0))
        w = records[-1].x
        if self.fit_intercept:
            self.coef_, self.intercept_ = w[:-1], float(w[-1])
        else:
            self.coef_, self.intercept_ = w, 0.0
        self.n_iter_ = records[-1].n
        self.n_samples_used_ = records[-1].cum_samples
        self.batch_sizes_ = np.array([r.batch_size for r in records])
        self.n_features_in_ = self.coef_.shape[0]

    def _linear(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_ + self.intercept_


class AdaNAPGClassifier(ClassifierMixin, _AdaNAPGBase):
    """Binary l1/l2-regularized logistic regression.

    Minimizes ``mean log(1 + exp(-z y.w)) + lambda1/2 ||w||^2 + lambda2 ||w||_1``
    with labels mapped to ``z = +-1`` (``classes_[1]`` is the positive class).

    Parameters
    ----------
    lambda1, lambda2 : float
        Smooth ridge and nonsmooth l1 weights.  With ``fit_intercept`` the
        intercept is penalized like any other coefficient.
    theta, nu : float
        Tolerances of the inner-product and orthogonality batch tests.
    max_iter : int
        Number of solver updates.
    random_state : int or None
        Base seed of the sampling stream.
    """

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        check_classification_targets(y)
        self.classes_ = np.unique(y)
        if self.classes_.shape[0] != 2:
            raise ValueError(f"AdaNAPGClassifier is binary; got {self.classes_.shape[0]} classes")
        z = np.where(y == self.classes_[1], 1.0, -1.0)
        self._solve(LogisticProblem(self._design(X), z, self.lambda1, self.lambda2))
        return self

    def decision_function(self, X):
        return self._linear(X)

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]


class AdaNAPGRegressor(RegressorMixin, _AdaNAPGBase):
    """Least squares ``mean (y.w - t)^2 / 2 + lambda1/2 ||w||^2 + lambda2 ||w||_1``."""

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self._solve(LeastSquaresProblem(self._design(X), y.astype(np.float64),
                                        self.lambda1, self.lambda2))
        return self

    def predict(self, X):
        return self._linear(X)
