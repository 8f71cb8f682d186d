import itertools

import numpy as np
import pytest

from chernfield.metricfield import HermitianMetricField, Patch

ACCEPTANCE_LINES = []

BOX = Patch(((-0.5, 0.5),) * 4, margin=0.05)


def leibniz_det(m):
    """Brute-force determinant by permutation expansion (independent of LAPACK)."""
    m = np.asarray(m)
    n = m.shape[0]
    total = 0j
    for perm in itertools.permutations(range(n)):
        inv = sum(1 for a in range(n) for b in range(a + 1, n) if perm[a] > perm[b])
        term = -1 if inv % 2 else 1
        for row, col in enumerate(perm):
            term = term * m[row, col]
        total += term
    return total


def rank1(expr, mode="product"):
    return HermitianMetricField([[expr]], mode=mode)


@pytest.fixture
def box():
    return BOX


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def record_acceptance(line):
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
