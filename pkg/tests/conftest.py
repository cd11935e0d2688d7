import math

import numpy as np
import pytest

from sgcert.core import RngStream


@pytest.fixture
def rng():
    return RngStream(12345, 0)


def iso_std_for_sigma(sigma: float, dim: int) -> float:
    """Gaussian std whose certified parameter 2 s sqrt(d) equals sigma."""
    return sigma / (2.0 * math.sqrt(dim))


def assert_bit_identical(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    assert a.shape == b.shape
    assert a.tobytes() == b.tobytes()


ACCEPTANCE_LINES: list = []


def report_criterion(number: int, passed: bool, detail: str):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
