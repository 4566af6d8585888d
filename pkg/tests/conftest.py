import pytest

from acceptance_log import RESULTS
from qhydro.core import PhysicsConfig, Potential, make_grid
from qhydro.schrodinger import evolve, init_gaussian


@pytest.fixture(scope="session")
def grid():
    return make_grid(1024, 40.0)


@pytest.fixture(scope="session")
def cfg():
    return PhysicsConfig()


@pytest.fixture(scope="session")
def free_run(grid, cfg):
    """Default free Gaussian (sigma0 = 1) evolved to t = 2 with dt = 1e-3, snapshots every 0.1."""
    return evolve(init_gaussian(grid, cfg, 1.0), Potential.free(), cfg, 1e-3, 2.0, 100)


@pytest.fixture(scope="session")
def dense_free_run(grid, cfg):
    """Same packet to t = 1, every step stored (ensemble driver)."""
    return evolve(init_gaussian(grid, cfg, 1.0), Potential.free(), cfg, 1e-3, 1.0, 1)


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
