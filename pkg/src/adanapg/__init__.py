"""Adaptive-sampling accelerated proximal gradient for stochastic composite optimization.

The scikit-learn wrappers live in :mod:`adanapg.estimators` and are not
imported here, so the core stays free of the scikit-learn import cost.
"""

from .core import CapabilityError, CompositeProblem, RandomStream, derive_stream, dot, norm
from .problems import (LassoToyProblem, LeastSquaresProblem, LogisticProblem,
                       ParamEstimationProblem, QuadraticProblem, load_sparse_dataset,
                       make_lasso_toy, make_logistic, make_param_estimation)
from .prox import Regularizer, gradient_mapping, prox_apply, soft_threshold
from .sampling import (AdaptiveTestParams, GradientBatch, SamplingSchedule, adaptive_acquire,
                       batch_statistics, schedule_size)
from .solver import (IterationRecord, SolverOptions, momentum_coeff, pi_next, run,
                     solve_oracle)

__version__ = "0.1.0"
