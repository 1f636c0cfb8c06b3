import sys

import numpy as np
import pytest

from adanapg.core import CompositeProblem, RandomStream


class SamplingOnlyProblem(CompositeProblem):
    """Noisy linear gradient with no exact-gradient capability."""

    def __init__(self, dim=3):
        self.dim = dim
        self.lipschitz = 1.0
        self.mu = 1.0

    def sample_gradients(self, x, k, stream):
        return np.asarray(x) + stream.generator.standard_normal((k, self.dim))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def stream():
    return RandomStream(2024, 0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
