import numpy as np
import pytest

from gmcsim.domain import Domain

ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    """Register one acceptance line; the terminal summary prints them all."""
    ACCEPTANCE_LINES.append((criterion, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for c, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda t: t[0]):
        terminalreporter.write_line(f"criterion {c:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def disk():
    return Domain.disk()


@pytest.fixture
def square():
    return Domain.square()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
