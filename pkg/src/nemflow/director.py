"""Director substep and its residual ``-Delta d + f(d)``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import BoundaryData, Grid, VelocityField, advect_director, apply_bc, laplacian, norm
from .linalg import LinearSolveConfig, NumericalFailure, helmholtz_solver
from .material import Params, Potential


@dataclass(frozen=True)
class DirectorStepConfig:
    rel_tol: float = 1e-10

    def __post_init__(self):
        if not 0 < self.rel_tol <= 1e-4:
            raise ValueError("rel_tol must lie in (0, 1e-4]")

    def linear(self) -> LinearSolveConfig:
        return LinearSolveConfig(rel_tol=self.rel_tol)


def boundary_lift(grid: Grid, boundary: BoundaryData | None, m: int) -> np.ndarray:
    """Inhomogeneous part of the Dirichlet Laplacian: ``Lap(d) = L0 d + lift``."""
    lift = np.zeros((grid.nx, grid.ny, m))
    if grid.bc_mode != "dirichlet":
        return lift
    lift[0] += 2.0 * boundary.left / grid.hx**2
    lift[-1] += 2.0 * boundary.right / grid.hx**2
    lift[:, 0] += 2.0 * boundary.bottom / grid.hy**2
    lift[:, -1] += 2.0 * boundary.top / grid.hy**2
    return lift


def director_step(
    d: np.ndarray,
    vel: VelocityField | None,
    dt: float,
    params: Params,
    boundary: BoundaryData | None = None,
    source: np.ndarray | None = None,
    config: DirectorStepConfig = DirectorStepConfig(),
) -> np.ndarray:
    """Solve ``(I - gamma dt Lap) d_new = d - dt (v . grad) d - gamma dt f(d) [+ dt source]``.

    Diffusion is implicit, transport and reaction explicit.  The Dirichlet
    trace is imposed through the ghost layer, hence held exactly.
    """
    grid = vel.grid if vel is not None else None
    if grid is None:
        raise ValueError("director_step needs a velocity field (pass VelocityField.zeros(grid))")
    d = np.asarray(d, dtype=float)
    m = d.shape[-1]
    P = apply_bc(d, grid, boundary)
    rhs = d - params.gamma * dt * params.potential.f(d)
    if vel.max_abs() > 0:
        rhs = rhs - dt * advect_director(vel, P, grid)
    if source is not None:
        rhs = rhs + dt * source
    coeff = params.gamma * dt
    rhs = rhs + coeff * boundary_lift(grid, boundary, m)
    if not np.isfinite(rhs).all():
        raise NumericalFailure("non-finite values in the director right-hand side")
    solver = helmholtz_solver(grid, "director", coeff, config.linear())
    out = np.empty_like(d)
    for k in range(m):
        out[..., k] = solver.solve(rhs[..., k].ravel()).reshape(grid.nx, grid.ny)
    return out


def director_residual(d, grid: Grid, potential: Potential, boundary: BoundaryData | None = None):
    """Return ``(-Delta d + f(d), its L2 norm)``."""
    P = apply_bc(d, grid, boundary)
    r = -laplacian(P, grid) + potential.f(P[1:-1, 1:-1])
    return r, norm(r, "L2", grid)
