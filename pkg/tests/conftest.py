import numpy as np
import pytest
from hypothesis import settings

from nls_lab.spectral import make_grid, sample

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid1():
    return make_grid(1, 64, 20.0)


@pytest.fixture
def grid2():
    return make_grid(2, 32, 16.0)


def gaussian(grid, a=0.5, amp=1.0, center=None):
    c = center or (0.0,) * grid.dim
    return sample(grid, lambda *x: amp * np.exp(-a * sum((xi - ci) ** 2 for xi, ci in zip(x, c))))


def random_field(grid, rng, scale=1.0):
    from nls_lab.spectral import Field

    return Field(grid, scale * (rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)))
