import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from heredlab import ElasticModuli, ScalarKernel

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


@pytest.fixture
def sls():
    """Standard linear solid C0 = C1 = 1, lambda1 = 1."""
    kernel = ScalarKernel.prony([(1.0, 1.0)])
    return kernel, ElasticModuli.for_kernel(kernel, 1.0)


def random_prony(rng, max_modes=4, rate_range=(0.2, 5.0), stiff_range=(0.1, 2.0)):
    n = int(rng.integers(1, max_modes + 1))
    rates = np.exp(rng.uniform(np.log(rate_range[0]), np.log(rate_range[1]), n))
    stiff = rng.uniform(*stiff_range, n)
    return ScalarKernel.prony(zip(stiff, rates))


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record and print one pass/fail line for an acceptance criterion."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
