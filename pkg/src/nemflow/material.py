"""Physical parameters, bulk potentials and the director's forcing on the flow."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    BoundaryData,
    Grid,
    VelocityField,
    apply_bc,
    cell_gradient,
    faces_from_cells,
    grad_sq,
    laplacian,
    pad_scalar,
)


@dataclass(frozen=True)
class GinzburgLandau:
    """``F(d) = (|d|^2 - 1)^2 / (4 eta^2)``, ``f(d) = (|d|^2 - 1) d / eta^2``."""

    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    def F(self, d):
        d = np.asarray(d, dtype=float)
        s = np.sum(d * d, axis=-1) - 1.0
        return s * s / (4.0 * self.eta**2)

    def f(self, d):
        d = np.asarray(d, dtype=float)
        s = np.sum(d * d, axis=-1, keepdims=True) - 1.0
        return s * d / self.eta**2

    def jac(self, d):
        d = np.asarray(d, dtype=float)
        m = d.shape[-1]
        s = np.sum(d * d, axis=-1)[..., None, None] - 1.0
        return (s * np.eye(m) + 2.0 * d[..., :, None] * d[..., None, :]) / self.eta**2

    def reaction_dt(self, gamma: float) -> float:
        # |f'| <= 3/eta^2 on |d|^2 <= 4/3; the extra factor keeps headroom up to |d| = sqrt 2
        return 0.5 * self.eta**2 / gamma / 3.0


@dataclass(frozen=True)
class Quadratic:
    """Convex potential ``F(d) = kappa |d|^2 / 2``."""

    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    def F(self, d):
        d = np.asarray(d, dtype=float)
        return 0.5 * self.kappa * np.sum(d * d, axis=-1)

    def f(self, d):
        return self.kappa * np.asarray(d, dtype=float)

    def jac(self, d):
        d = np.asarray(d, dtype=float)
        m = d.shape[-1]
        return np.broadcast_to(self.kappa * np.eye(m), d.shape[:-1] + (m, m)).copy()

    def reaction_dt(self, gamma: float) -> float:
        return 0.5 / (gamma * self.kappa)


Potential = GinzburgLandau | Quadratic


@dataclass(frozen=True)
class Params:
    nu: float = 1.0
    lam: float = 1.0
    gamma: float = 1.0
    potential: Potential = GinzburgLandau(1.0)

    def __post_init__(self):
        for name in ("nu", "gamma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        # lam = 0 decouples the flow; only used for validation runs
        if not self.lam >= 0:
            raise ValueError("lam must be non-negative")


def F_val(d, potential: Potential):
    return potential.F(d)


def f_val(d, potential: Potential):
    return potential.f(d)


def f_jac(d, potential: Potential):
    return potential.jac(d)


def bulk_energy(d, grid: Grid, potential: Potential, boundary: BoundaryData | None = None) -> float:
    """``E(d) = 1/2 ||grad d||^2 + int F(d)`` with midpoint quadrature for F."""
    P = apply_bc(d, grid, boundary)
    return 0.5 * grad_sq(P, grid) + _integral(potential.F(P[1:-1, 1:-1]), grid)


def _integral(a, grid: Grid) -> float:
    return float(np.sum(np.ascontiguousarray(a).ravel())) * grid.cell_area


def chemical_potential(P, grid: Grid, potential: Potential) -> np.ndarray:
    """``Delta d - f(d)`` for a padded director."""
    return laplacian(P, grid) - potential.f(P[1:-1, 1:-1])


def elastic_force(d, grid: Grid, params: Params, boundary: BoundaryData | None = None) -> VelocityField:
    """Face forcing ``-lam (grad d)^T (Delta d - f(d))``.

    The pure-gradient part of ``-lam div(grad d . grad d)`` is carried by the
    flow solver's pressure, which therefore represents
    ``P + lam |grad d|^2 / 2 + lam F(d)``.
    """
    P = apply_bc(d, grid, boundary)
    mu = chemical_potential(P, grid, params.potential)
    gx, gy = cell_gradient(P, grid)
    X = np.sum(gx * mu, axis=-1)
    Y = np.sum(gy * mu, axis=-1)
    return faces_from_cells(-params.lam * X, -params.lam * Y, grid)


def _extend(T, grid: Grid):
    """One ghost layer for a derived cell quantity: wrap, or linear extrapolation."""
    if grid.periodic:
        return pad_scalar(T, grid)
    P = np.empty((grid.nx + 2, grid.ny + 2) + T.shape[2:])
    P[1:-1, 1:-1] = T
    P[0, 1:-1] = 2.0 * T[0] - T[1]
    P[-1, 1:-1] = 2.0 * T[-1] - T[-2]
    P[1:-1, 0] = 2.0 * T[:, 0] - T[:, 1]
    P[1:-1, -1] = 2.0 * T[:, -1] - T[:, -2]
    P[0, 0] = P[0, -1] = P[-1, 0] = P[-1, -1] = 0.0
    return P


def stress_divergence(d, grid: Grid, boundary: BoundaryData | None = None) -> VelocityField:
    """``div(grad d . grad d)`` on the faces, assembled from the full tensor.

    Only used as an independent cross-check of :func:`elastic_force`; accuracy
    near walls is first order because the tensor is extrapolated there.
    """
    P = apply_bc(d, grid, boundary)
    gx, gy = cell_gradient(P, grid)
    Txx = _extend(np.sum(gx * gx, axis=-1), grid)
    Txy = _extend(np.sum(gx * gy, axis=-1), grid)
    Tyy = _extend(np.sum(gy * gy, axis=-1), grid)
    hx, hy = grid.hx, grid.hy
    # u faces: d/dx Txx by face difference, d/dy Txy averaged from the two cells
    dTxx = (Txx[1:, 1:-1] - Txx[:-1, 1:-1]) / hx
    dyTxy = (Txy[:, 2:] - Txy[:, :-2]) / (2.0 * hy)
    su = dTxx + 0.5 * (dyTxy[1:] + dyTxy[:-1])
    dTyy = (Tyy[1:-1, 1:] - Tyy[1:-1, :-1]) / hy
    dxTxy = (Txy[2:, :] - Txy[:-2, :]) / (2.0 * hx)
    sv = dTyy + 0.5 * (dxTxy[:, 1:] + dxTxy[:, :-1])
    return VelocityField(su, sv, grid).enforce_bc()
