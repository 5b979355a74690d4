"""Momentum substep: semi-implicit viscous solve followed by pressure projection."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import (
    Grid,
    VelocityField,
    advect_velocity,
    divergence,
    gradient_cc_to_mac,
)
from .linalg import (
    LinearSolveConfig,
    NumericalFailure,
    helmholtz_solver,
    poisson_solver,
    unknowns,
)
from .material import Params


@dataclass
class FlowState:
    """Velocity and the modified pressure (zero mean)."""

    v: VelocityField
    p: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.p is None:
            self.p = np.zeros((self.v.grid.nx, self.v.grid.ny))

    @property
    def grid(self) -> Grid:
        return self.v.grid

    def copy(self) -> "FlowState":
        return FlowState(self.v.copy(), self.p.copy())


def _helmholtz(vel_rhs: VelocityField, coeff: float, config: LinearSolveConfig) -> VelocityField:
    g = vel_rhs.grid
    out = VelocityField.zeros(g)
    for comp, src, dst in (("u", vel_rhs.u, out.u), ("v", vel_rhs.v, out.v)):
        view = unknowns(g, comp, dst)
        rhs = unknowns(g, comp, src)
        view[...] = helmholtz_solver(g, comp, coeff, config).solve(rhs.ravel()).reshape(rhs.shape)
    return out.enforce_bc()


def tentative_velocity(
    state: FlowState,
    forcing: VelocityField | None,
    dt: float,
    params: Params,
    config: LinearSolveConfig = LinearSolveConfig(),
) -> VelocityField:
    """Solve ``(I - nu dt Lap) v* = v - dt N(v) - dt grad p + dt forcing``."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    v = state.v
    if dt == 0:
        return v.copy()
    rhs = v - dt * advect_velocity(v) - dt * gradient_cc_to_mac(state.p, v.grid)
    if forcing is not None:
        rhs = rhs + dt * forcing
    rhs.enforce_bc()
    if not rhs.all_finite():
        raise NumericalFailure("non-finite values in the momentum right-hand side")
    return _helmholtz(rhs, params.nu * dt, config)


def pressure_project(
    v_star: VelocityField,
    dt: float,
    p: np.ndarray | None = None,
    config: LinearSolveConfig = LinearSolveConfig(),
    compat_tol: float = 1e-8,
):
    """Make ``v_star`` discretely divergence free.

    Returns ``(v_new, phi, p_new)`` with ``Lap phi = div v_star / dt``,
    ``v_new = v_star - dt grad phi`` and ``p_new = p + phi``; ``phi`` has zero mean.
    """
    g = v_star.grid
    if p is None:
        p = np.zeros((g.nx, g.ny))
    if not v_star.all_finite():
        raise NumericalFailure("non-finite tentative velocity")
    div = divergence(v_star)
    # roundoff in the telescoping flux sum scales with the face velocities
    scale = max(float(np.max(np.abs(div))), v_star.max_abs() / g.h, np.finfo(float).tiny)
    mean = float(np.mean(div))
    if abs(mean) > compat_tol * scale:
        raise NumericalFailure(
            f"incompatible projection data: mean divergence {mean:.3e} (boundary fluxes do not cancel)"
        )
    rhs = (div - mean) / dt
    phi = poisson_solver(g, config).solve(rhs.ravel()).reshape(g.nx, g.ny)
    phi -= phi.mean()
    v_new = v_star - dt * gradient_cc_to_mac(phi, g)
    v_new.enforce_bc()
    return v_new, phi, p + phi


def flow_step(
    state: FlowState,
    forcing: VelocityField | None,
    dt: float,
    params: Params,
    config: LinearSolveConfig = LinearSolveConfig(),
) -> FlowState:
    """One incremental pressure-correction step."""
    v_star = tentative_velocity(state, forcing, dt, params, config)
    if dt == 0:
        return FlowState(v_star, state.p.copy())
    v_new, _, p_new = pressure_project(v_star, dt, state.p, config)
    return FlowState(v_new, p_new)
