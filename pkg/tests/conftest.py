import math

import numpy as np
import pytest
from hypothesis import settings

ACCEPTANCE_LINES = []

from qduffing.meanfield import PhysParams, solve_omega

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def params_at_alpha(alpha: float) -> PhysParams:
    """m = omega = 1 parameters whose mean field has the given alpha (< 1/6)."""
    Omega = 1.0 / math.sqrt(1.0 - 6.0 * alpha)
    return PhysParams(lam=4.0 * Omega**3 * alpha)


@pytest.fixture(scope="session")
def solve():
    cache = {}

    def _solve(lam=0.0, m=1.0, omega=1.0, convention="m_normalized"):
        key = (lam, m, omega, convention)
        if key not in cache:
            cache[key] = solve_omega(PhysParams(m=m, omega=omega, lam=lam, convention=convention))
        return cache[key]

    return _solve


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
