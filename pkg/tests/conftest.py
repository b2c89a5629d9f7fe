import numpy as np
import pytest

from pnmftopics import CountMatrix


def random_counts(n, m, density=0.5, rate=3.0, seed=0, nonempty=True):
    rng = np.random.default_rng(seed)
    dense = rng.poisson(rate, size=(n, m)) * (rng.random((n, m)) < density)
    if nonempty:
        # at least one count in every row and column
        dense[np.arange(n), rng.integers(0, m, size=n)] += 1
        dense[rng.integers(0, n, size=m), np.arange(m)] += 1
    return CountMatrix.from_dense(dense)


def random_factors(n, m, K, seed=0, low=0.1, high=2.0):
    rng = np.random.default_rng(seed)
    return rng.uniform(low, high, (n, K)), rng.uniform(low, high, (m, K))


@pytest.fixture
def small_X():
    return random_counts(12, 15, seed=3)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(lines):
        terminalreporter.write_line(lines[num])
