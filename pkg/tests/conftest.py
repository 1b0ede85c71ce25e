import numpy as np
import pytest

from fourthmoment import _oracles


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


@pytest.fixture
def random_kernel(gen):
    def make(dim, order, nnz=None):
        return _oracles.random_kernel(gen, dim, order, nnz)

    return make


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion and assert it."""

    def report(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
