import numpy as np
import pytest

from nemflow.director import DirectorStepConfig, boundary_lift, director_residual, director_step
from nemflow.grid import BoundaryData, Grid, VelocityField, apply_bc, laplacian
from nemflow.material import GinzburgLandau, Params, Quadratic


def test_sine_mode_factor_dirichlet():
    # sin(pi x) sin(pi y) at cell centres is an eigenvector of the cell-centred
    # Dirichlet Laplacian with symbol (4/h^2) sin^2(pi h / 2) per direction
    n, dt, kappa, gamma = 16, 0.01, 2.0, 0.7
    g = Grid(n, n, 1.0, 1.0, "dirichlet")
    X, Y = g.cell_coords()
    mode = np.sin(np.pi * X) * np.sin(np.pi * Y)
    d = np.stack([mode, -0.5 * mode], -1)
    mu = 2 * (4 / g.h**2) * np.sin(np.pi * g.h / 2) ** 2
    p = Params(gamma=gamma, potential=Quadratic(kappa))
    out = director_step(d, VelocityField.zeros(g), dt, p, BoundaryData.zeros(g, (2,)))
    factor = (1 - gamma * dt * kappa) / (1 + gamma * dt * mu)
    np.testing.assert_allclose(out, factor * d, atol=1e-13)


def test_trace_is_held_exactly():
    g = Grid(12, 10, 1.0, 1.0, "dirichlet")
    b = BoundaryData.from_function(g, lambda x, y: np.stack([np.cos(x + y), np.sin(x + y)], -1))
    rng = np.random.default_rng(3)
    d = rng.normal(size=(12, 10, 2))
    out = director_step(d, VelocityField.zeros(g), 0.01, Params(potential=GinzburgLandau(0.3)), b)
    P = apply_bc(out, g, b)
    np.testing.assert_allclose(0.5 * (P[0, 1:-1] + P[1, 1:-1]), b.left, atol=1e-14)


@pytest.mark.parametrize("mode", ["free_slip", "periodic"])
def test_uniform_unit_state_is_fixed(mode):
    g = Grid(8, 8, 1.0, 1.0, mode)
    d = np.tile([0.6, 0.8], (8, 8, 1))
    v = VelocityField.from_streamfunction(g, lambda x, y: np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y))
    out = director_step(d, v, 0.01, Params(potential=GinzburgLandau(0.2)))
    np.testing.assert_allclose(out, d, atol=1e-14)


def test_lift_matches_ghost_layer(rng):
    g = Grid(9, 7, 1.0, 1.0, "dirichlet")
    b = BoundaryData(rng.normal(size=(7, 2)), rng.normal(size=(7, 2)), rng.normal(size=(9, 2)), rng.normal(size=(9, 2)))
    d = rng.normal(size=(9, 7, 2))
    full = laplacian(apply_bc(d, g, b), g)
    homog = laplacian(apply_bc(d, g, BoundaryData.zeros(g, (2,))), g)
    np.testing.assert_allclose(full - homog, boundary_lift(g, b, 2), atol=1e-10)


def test_step_requires_velocity():
    with pytest.raises(ValueError):
        director_step(np.zeros((4, 4, 2)), None, 0.1, Params())
    with pytest.raises(ValueError):
        DirectorStepConfig(rel_tol=1.0)


def test_residual_and_source():
    g = Grid(8, 8, 1.0, 1.0, "periodic")
    X, Y = g.cell_coords()
    d = np.stack([np.cos(2 * np.pi * X), np.sin(2 * np.pi * X)], -1)
    r, rn = director_residual(d, g, Quadratic(1.0))
    assert rn > 0
    # adding the residual as a source makes d a fixed point of the step (v = 0)
    p = Params(potential=Quadratic(1.0))
    out = director_step(d, VelocityField.zeros(g), 0.05, p, source=r)
    np.testing.assert_allclose(out, d, atol=1e-12)
