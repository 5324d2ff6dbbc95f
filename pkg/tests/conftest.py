import math

import numpy as np
import pytest

from hardy_nehari import grid as rg
from hardy_nehari.closed_forms import hardy_limit


def talenti_constant(N: int) -> float:
    """Best Sobolev constant in closed form (test oracle only)."""
    return math.pi * N * (N - 2) * (math.gamma(N / 2) / math.gamma(N)) ** (2.0 / N)


def sphere_area_oracle(N: int) -> float:
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


@pytest.fixture(scope="session")
def talenti():
    return talenti_constant


@pytest.fixture(scope="session")
def half_lambdas():
    def make(N: int) -> tuple[float, float, float]:
        lam = hardy_limit(N) / 2.0
        return (lam, lam, lam)

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def smooth_bump(g: rg.RadialGrid, center: float, width: float) -> np.ndarray:
    s = np.log(g.r)
    return np.exp(-((s - center) / width) ** 2)


def compact_bump(g: rg.RadialGrid, center: float, width: float) -> np.ndarray:
    """Smooth bump in ``log r`` supported on ``|log r - center| < width``."""
    x = (np.log(g.r) - center) / width
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
