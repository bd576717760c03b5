import numpy as np
import pytest

from congestion_waves.model import ModelParams
from congestion_waves.numerics import Grid
from congestion_waves.profile import solve_profile


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def grid():
    return Grid(-10.0, 20.0, 6001)


@pytest.fixture(scope="session")
def profile(params, grid):
    return solve_profile(params, grid)


@pytest.fixture(scope="session")
def coarse_grid():
    return Grid(-10.0, 20.0, 1501)


@pytest.fixture(scope="session")
def coarse_profile(params, coarse_grid):
    return solve_profile(params, coarse_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def record_criterion(request):
    """Append one PASS/FAIL line to the acceptance summary."""

    def record(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        request.config.acceptance_lines.append(line)
        return line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split(maxsplit=1)[1]):
            terminalreporter.write_line(line)
