import numpy as np
import pytest

from nemflow.grid import BoundaryData, Grid, VelocityField

# filled by test_acceptance.py, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_velocity(grid: Grid, rng) -> VelocityField:
    v = VelocityField(rng.normal(size=(grid.nx + 1, grid.ny)), rng.normal(size=(grid.nx, grid.ny + 1)), grid)
    return v.enforce_bc()


def random_boundary(grid: Grid, rng, m=2) -> BoundaryData:
    return BoundaryData(
        rng.normal(size=(grid.ny, m)), rng.normal(size=(grid.ny, m)),
        rng.normal(size=(grid.nx, m)), rng.normal(size=(grid.nx, m)),
    )


GRIDS = [
    Grid(12, 9, 1.0, 0.7, "dirichlet"),
    Grid(10, 14, 1.3, 1.0, "free_slip"),
    Grid(16, 12, 2.0, 1.5, "periodic"),
]
