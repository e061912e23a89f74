import numpy as np
import pytest

from coupledmaps.system import ExpandingSiteMap, diffusive_system, uncoupled_system


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def perturbed_site():
    return ExpandingSiteMap(2, [(0.05, 1, 0.0)])


@pytest.fixture
def tripling_family():
    site = ExpandingSiteMap(3)
    return lambda N: diffusive_system(N, 0.1, site)


@pytest.fixture
def doubling_uncoupled():
    return lambda N: uncoupled_system(N)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion; lines are echoed in the terminal summary."""

    def record(number, title, passed, detail):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
