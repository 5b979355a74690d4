"""Uniform rectangular grids, MAC-staggered fields and finite-difference stencils.

Layout conventions (all arrays indexed ``[i, j]`` with ``i`` along x):

* cell-centred scalars: ``(nx, ny)``; directors: ``(nx, ny, m)``
* velocity ``u`` on vertical faces: ``(nx + 1, ny)``, ``v`` on horizontal
  faces: ``(nx, ny + 1)``.  On periodic grids the last face duplicates the
  first one, on walled grids the boundary faces hold the (zero) normal
  velocity.

Ghost layers are never stored; :func:`apply_bc` returns a padded copy with one
ghost layer filled according to the boundary mode.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BC_MODES = ("dirichlet", "free_slip", "periodic")


class BoundaryConditionError(ValueError):
    """Boundary mode and boundary data do not fit together."""


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0
    bc_mode: str = "dirichlet"

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs at least 4x4 cells, got {self.nx}x{self.ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("domain extents must be positive")
        if self.bc_mode not in BC_MODES:
            raise ValueError(f"bc_mode must be one of {BC_MODES}, got {self.bc_mode!r}")

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def h(self) -> float:
        return min(self.hx, self.hy)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def periodic(self) -> bool:
        return self.bc_mode == "periodic"

    @property
    def xc(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def yc(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    @property
    def xf(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.hx

    @property
    def yf(self) -> np.ndarray:
        return np.arange(self.ny + 1) * self.hy

    def cell_coords(self):
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    def u_coords(self):
        return np.meshgrid(self.xf, self.yc, indexing="ij")

    def v_coords(self):
        return np.meshgrid(self.xc, self.yf, indexing="ij")

    def corner_coords(self):
        return np.meshgrid(self.xf, self.yf, indexing="ij")


@dataclass(frozen=True)
class BoundaryData:
    """Time-independent Dirichlet trace of the director, one value per boundary face.

    ``left``/``right`` have shape ``(ny, m)``, ``bottom``/``top`` ``(nx, m)``.
    """

    left: np.ndarray
    right: np.ndarray
    bottom: np.ndarray
    top: np.ndarray

    @classmethod
    def from_function(cls, grid: Grid, g) -> "BoundaryData":
        """Sample ``g(x, y) -> (..., m)`` at the boundary face centres."""
        xc, yc = grid.xc, grid.yc
        zx, zy = np.zeros_like(yc), np.zeros_like(xc)
        return cls(
            left=np.asarray(g(zx, yc), dtype=float),
            right=np.asarray(g(zx + grid.Lx, yc), dtype=float),
            bottom=np.asarray(g(xc, zy), dtype=float),
            top=np.asarray(g(xc, zy + grid.Ly), dtype=float),
        )

    @classmethod
    def constant(cls, grid: Grid, value) -> "BoundaryData":
        value = np.asarray(value, dtype=float)
        return cls(
            left=np.tile(value, (grid.ny, 1)),
            right=np.tile(value, (grid.ny, 1)),
            bottom=np.tile(value, (grid.nx, 1)),
            top=np.tile(value, (grid.nx, 1)),
        )

    @classmethod
    def zeros(cls, grid: Grid, trailing=()) -> "BoundaryData":
        trailing = tuple(trailing)
        return cls(
            np.zeros((grid.ny,) + trailing),
            np.zeros((grid.ny,) + trailing),
            np.zeros((grid.nx,) + trailing),
            np.zeros((grid.nx,) + trailing),
        )

    @property
    def m(self) -> int:
        return self.left.shape[-1]

    def rotated(self, Q) -> "BoundaryData":
        Q = np.asarray(Q, dtype=float)
        return BoundaryData(*(a @ Q.T for a in (self.left, self.right, self.bottom, self.top)))

    def matches(self, grid: Grid) -> bool:
        return (
            self.left.shape[0] == grid.ny
            and self.right.shape[0] == grid.ny
            and self.bottom.shape[0] == grid.nx
            and self.top.shape[0] == grid.nx
        )


@dataclass
class VelocityField:
    u: np.ndarray
    v: np.ndarray
    grid: Grid = field(repr=False)

    @classmethod
    def zeros(cls, grid: Grid) -> "VelocityField":
        return cls(np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1)), grid)

    @classmethod
    def from_streamfunction(cls, grid: Grid, psi) -> "VelocityField":
        """Build ``(d psi/dy, -d psi/dx)`` from corner samples of ``psi(x, y)``.

        The result is discretely divergence free to roundoff; if ``psi`` vanishes
        on the walls the normal face velocities are exactly zero.
        """
        X, Y = grid.corner_coords()
        P = np.asarray(psi(X, Y), dtype=float)
        if grid.periodic:
            # corner samples must be exactly periodic for the wrap to be consistent
            P[-1, :] = P[0, :]
            P[:, -1] = P[:, 0]
        u = (P[:, 1:] - P[:, :-1]) / grid.hy
        v = -(P[1:, :] - P[:-1, :]) / grid.hx
        return cls(u, v, grid).enforce_bc()

    def copy(self) -> "VelocityField":
        return VelocityField(self.u.copy(), self.v.copy(), self.grid)

    def enforce_bc(self) -> "VelocityField":
        """Zero wall-normal faces, or sync the duplicate periodic faces (in place)."""
        if self.grid.periodic:
            self.u[-1] = self.u[0]
            self.v[:, -1] = self.v[:, 0]
        else:
            self.u[0] = 0.0
            self.u[-1] = 0.0
            self.v[:, 0] = 0.0
            self.v[:, -1] = 0.0
        return self

    def unique(self):
        """Face arrays without duplicated or fixed boundary faces."""
        if self.grid.periodic:
            return self.u[:-1], self.v[:, :-1]
        return self.u[1:-1], self.v[:, 1:-1]

    def __add__(self, other):
        return VelocityField(self.u + other.u, self.v + other.v, self.grid)

    def __sub__(self, other):
        return VelocityField(self.u - other.u, self.v - other.v, self.grid)

    def __mul__(self, a):
        return VelocityField(a * self.u, a * self.v, self.grid)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.u)), np.max(np.abs(self.v))))

    def all_finite(self) -> bool:
        return bool(np.isfinite(self.u).all() and np.isfinite(self.v).all())


# --------------------------------------------------------------------------
# ghost layers
# --------------------------------------------------------------------------

def _pad_cells(values, grid: Grid, rule: str, boundary: BoundaryData | None = None):
    a = np.asarray(values, dtype=float)
    if a.shape[:2] == (grid.nx + 2, grid.ny + 2):
        a = a[1:-1, 1:-1]
    if a.shape[:2] != (grid.nx, grid.ny):
        raise ValueError(f"field shape {a.shape} does not match grid {grid.nx}x{grid.ny}")
    P = np.empty((grid.nx + 2, grid.ny + 2) + a.shape[2:])
    P[1:-1, 1:-1] = a
    if rule == "periodic":
        P[0, 1:-1] = a[-1]
        P[-1, 1:-1] = a[0]
        P[1:-1, 0] = a[:, -1]
        P[1:-1, -1] = a[:, 0]
        P[0, 0], P[0, -1] = a[-1, -1], a[-1, 0]
        P[-1, 0], P[-1, -1] = a[0, -1], a[0, 0]
        return P
    if rule == "neumann":
        P[0, 1:-1] = a[0]
        P[-1, 1:-1] = a[-1]
        P[1:-1, 0] = a[:, 0]
        P[1:-1, -1] = a[:, -1]
    elif rule == "dirichlet":
        P[0, 1:-1] = 2.0 * boundary.left - a[0]
        P[-1, 1:-1] = 2.0 * boundary.right - a[-1]
        P[1:-1, 0] = 2.0 * boundary.bottom - a[:, 0]
        P[1:-1, -1] = 2.0 * boundary.top - a[:, -1]
    else:
        raise ValueError(rule)
    # corners are never read by the stencils; bilinear extrapolation keeps them tame
    P[0, 0] = P[0, 1] + P[1, 0] - P[1, 1]
    P[0, -1] = P[0, -2] + P[1, -1] - P[1, -2]
    P[-1, 0] = P[-1, 1] + P[-2, 0] - P[-2, 1]
    P[-1, -1] = P[-1, -2] + P[-2, -1] - P[-2, -2]
    return P


def apply_bc(values, grid: Grid, boundary: BoundaryData | None = None) -> np.ndarray:
    """Pad a director-like cell field with one ghost layer.

    Dirichlet: ghost = 2 g - interior, so the face-centred trace equals g.
    Free slip: ghost = interior (zero normal derivative).  Periodic: wrap.
    Accepts interior or already padded arrays; applying it twice is the same
    as applying it once.
    """
    mode = grid.bc_mode
    if mode == "dirichlet":
        if boundary is None:
            raise BoundaryConditionError("dirichlet mode requires boundary data g")
        if not boundary.matches(grid):
            raise BoundaryConditionError("boundary data does not match the grid")
        return _pad_cells(values, grid, "dirichlet", boundary)
    if boundary is not None:
        raise BoundaryConditionError(f"{mode} mode takes no director trace data")
    return _pad_cells(values, grid, "periodic" if mode == "periodic" else "neumann")


def pad_scalar(values, grid: Grid) -> np.ndarray:
    """Pad a pressure-like field: homogeneous Neumann at walls, wrap if periodic."""
    return _pad_cells(values, grid, "periodic" if grid.periodic else "neumann")


def pad_velocity(vel: VelocityField):
    """Padded copies ``Up`` of shape (nx+3, ny+2) and ``Vp`` of shape (nx+2, ny+3).

    ``Up[i + 1, j + 1] = u[i, j]``.  Tangential ghosts are odd reflections for
    no-slip walls and even reflections for free slip.
    """
    g = vel.grid
    u, v = vel.u, vel.v
    Up = np.zeros((g.nx + 3, g.ny + 2))
    Vp = np.zeros((g.nx + 2, g.ny + 3))
    Up[1:-1, 1:-1] = u
    Vp[1:-1, 1:-1] = v
    if g.periodic:
        Up[0, 1:-1] = u[-2]
        Up[-1, 1:-1] = u[1]
        Up[:, 0] = Up[:, -2]
        Up[:, -1] = Up[:, 1]
        Vp[1:-1, 0] = v[:, -2]
        Vp[1:-1, -1] = v[:, 1]
        Vp[0, :] = Vp[-2, :]
        Vp[-1, :] = Vp[1, :]
        return Up, Vp
    s = -1.0 if g.bc_mode == "dirichlet" else 1.0
    Up[1:-1, 0] = s * u[:, 0]
    Up[1:-1, -1] = s * u[:, -1]
    Vp[0, 1:-1] = s * v[0]
    Vp[-1, 1:-1] = s * v[-1]
    return Up, Vp


# --------------------------------------------------------------------------
# stencils
# --------------------------------------------------------------------------

def laplacian(P, grid: Grid) -> np.ndarray:
    """Five-point Laplacian of a padded cell field; returns the interior."""
    c = P[1:-1, 1:-1]
    return (P[2:, 1:-1] - 2.0 * c + P[:-2, 1:-1]) / grid.hx**2 + (
        P[1:-1, 2:] - 2.0 * c + P[1:-1, :-2]
    ) / grid.hy**2


def cell_gradient(P, grid: Grid):
    """Centred differences of a padded cell field at the cell centres."""
    gx = (P[2:, 1:-1] - P[:-2, 1:-1]) / (2.0 * grid.hx)
    gy = (P[1:-1, 2:] - P[1:-1, :-2]) / (2.0 * grid.hy)
    return gx, gy


def divergence(vel: VelocityField) -> np.ndarray:
    g = vel.grid
    return (vel.u[1:] - vel.u[:-1]) / g.hx + (vel.v[:, 1:] - vel.v[:, :-1]) / g.hy


def gradient_cc_to_mac(p, grid: Grid) -> VelocityField:
    """Two-point face gradient of a cell scalar; wall-normal faces get zero."""
    P = pad_scalar(p, grid)
    gu = (P[1:, 1:-1] - P[:-1, 1:-1]) / grid.hx
    gv = (P[1:-1, 1:] - P[1:-1, :-1]) / grid.hy
    return VelocityField(gu, gv, grid).enforce_bc()


def faces_from_cells(X, Y, grid: Grid) -> VelocityField:
    """Average cell-centred vector components onto the faces.

    This is the exact adjoint of :func:`velocity_at_centers` with respect to
    the face and cell inner products, which is what makes the director
    transport and the elastic forcing exchange energy without loss.
    """
    if grid.periodic:
        Xp = np.concatenate([X[-1:], X, X[:1]], axis=0)
        Yp = np.concatenate([Y[:, -1:], Y, Y[:, :1]], axis=1)
    else:
        Xp = np.concatenate([np.zeros_like(X[:1]), X, np.zeros_like(X[:1])], axis=0)
        Yp = np.concatenate([np.zeros_like(Y[:, :1]), Y, np.zeros_like(Y[:, :1])], axis=1)
    fu = 0.5 * (Xp[:-1] + Xp[1:])[: grid.nx + 1]
    fv = 0.5 * (Yp[:, :-1] + Yp[:, 1:])[:, : grid.ny + 1]
    return VelocityField(fu, fv, grid).enforce_bc()


def velocity_at_centers(vel: VelocityField):
    return 0.5 * (vel.u[1:] + vel.u[:-1]), 0.5 * (vel.v[:, 1:] + vel.v[:, :-1])


def advect_director(vel: VelocityField, P, grid: Grid) -> np.ndarray:
    """``(v . grad) d`` at cell centres for a padded director ``P``."""
    uc, vc = velocity_at_centers(vel)
    gx, gy = cell_gradient(P, grid)
    if gx.ndim == 3:
        uc, vc = uc[..., None], vc[..., None]
    return uc * gx + vc * gy


def velocity_laplacian(vel: VelocityField):
    g = vel.grid
    Up, Vp = pad_velocity(vel)
    lu = (Up[2:, 1:-1] - 2.0 * Up[1:-1, 1:-1] + Up[:-2, 1:-1]) / g.hx**2 + (
        Up[1:-1, 2:] - 2.0 * Up[1:-1, 1:-1] + Up[1:-1, :-2]
    ) / g.hy**2
    lv = (Vp[2:, 1:-1] - 2.0 * Vp[1:-1, 1:-1] + Vp[:-2, 1:-1]) / g.hx**2 + (
        Vp[1:-1, 2:] - 2.0 * Vp[1:-1, 1:-1] + Vp[1:-1, :-2]
    ) / g.hy**2
    return VelocityField(lu, lv, g).enforce_bc()


def advect_velocity(vel: VelocityField) -> VelocityField:
    """Centred divergence-form ``(v . grad) v`` on the MAC layout.

    Kinetic-energy neutral whenever ``vel`` is discretely divergence free.
    """
    g = vel.grid
    hx, hy = g.hx, g.hy
    Up, Vp = pad_velocity(vel)
    # u-momentum: x flux at cell centres, y flux at corners
    uc = 0.5 * (Up[1:-1, 1:-1][1:] + Up[1:-1, 1:-1][:-1])  # (nx, ny)
    if g.periodic:
        ucp = np.concatenate([uc[-1:], uc, uc[:1]], axis=0)
    else:
        ucp = np.concatenate([uc[:1], uc, uc[-1:]], axis=0)  # unused at wall faces
    fx = ucp**2
    nu_x = (fx[1:] - fx[:-1]) / hx  # (nx+1, ny)
    vbar = 0.5 * (Vp[:-1, 1:-1] + Vp[1:, 1:-1])  # corners (nx+1, ny+1)
    utld = 0.5 * (Up[1:-1, :-1] + Up[1:-1, 1:])  # corners (nx+1, ny+1)
    fy = vbar * utld
    nu_y = (fy[:, 1:] - fy[:, :-1]) / hy
    # v-momentum
    vc = 0.5 * (Vp[1:-1, 1:-1][:, 1:] + Vp[1:-1, 1:-1][:, :-1])  # (nx, ny)
    if g.periodic:
        vcp = np.concatenate([vc[:, -1:], vc, vc[:, :1]], axis=1)
    else:
        vcp = np.concatenate([vc[:, :1], vc, vc[:, -1:]], axis=1)
    gy_ = vcp**2
    nv_y = (gy_[:, 1:] - gy_[:, :-1]) / hy  # (nx, ny+1)
    ubar = 0.5 * (Up[1:-1, :-1] + Up[1:-1, 1:])  # u averaged in y to corners
    vtld = 0.5 * (Vp[:-1, 1:-1] + Vp[1:, 1:-1])  # v averaged in x to corners
    gx_ = ubar * vtld
    nv_x = (gx_[1:, :] - gx_[:-1, :]) / hx
    return VelocityField(nu_x + nu_y, nv_x + nv_y, g).enforce_bc()


# --------------------------------------------------------------------------
# inner products and norms
# --------------------------------------------------------------------------

def _sumsq(a) -> float:
    a = np.ascontiguousarray(a, dtype=float).ravel()
    return float(np.dot(a, a))


def inner(a, b, grid: Grid) -> float:
    """Cell inner product; fixed row-major reduction order."""
    a = np.ascontiguousarray(a, dtype=float).ravel()
    b = np.ascontiguousarray(b, dtype=float).ravel()
    return float(np.dot(a, b)) * grid.cell_area


def velocity_inner(a: VelocityField, b: VelocityField) -> float:
    au, av = a.unique()
    bu, bv = b.unique()
    return inner(au, bu, a.grid) + inner(av, bv, a.grid)


def _face_diff_sumsq(P, grid: Grid, weighted: bool) -> float:
    """Sum of squared face differences of a padded cell field (times cell area).

    Faces between an interior cell and a ghost carry weight 1/2: the boundary
    sits half a cell away, and this weighting makes the quadrature the exact
    energy whose variation is the five-point Laplacian.
    """
    dx = (P[1:, 1:-1] - P[:-1, 1:-1]) / grid.hx
    dy = (P[1:-1, 1:] - P[1:-1, :-1]) / grid.hy
    if grid.periodic:
        return (_sumsq(dx[:-1]) + _sumsq(dy[:, :-1])) * grid.cell_area
    total = _sumsq(dx[1:-1]) + _sumsq(dy[:, 1:-1])
    if weighted:
        total += 0.5 * (_sumsq(dx[0]) + _sumsq(dx[-1]) + _sumsq(dy[:, 0]) + _sumsq(dy[:, -1]))
    return total * grid.cell_area


def grad_sq(P, grid: Grid) -> float:
    """``||grad f||^2`` of a padded cell field."""
    return _face_diff_sumsq(P, grid, True)


def velocity_grad_sq(vel: VelocityField) -> float:
    """``||grad v||^2`` consistent with :func:`velocity_laplacian`."""
    g = vel.grid
    Up, Vp = pad_velocity(vel)
    a = g.cell_area
    if g.periodic:
        u_dx = (Up[2:-1, 1:-1] - Up[1:-2, 1:-1]) / g.hx  # nx cell differences
        u_dy = (Up[1:-2, 1:] - Up[1:-2, :-1]) / g.hy
        v_dy = (Vp[1:-1, 2:-1] - Vp[1:-1, 1:-2]) / g.hy
        v_dx = (Vp[1:, 1:-2] - Vp[:-1, 1:-2]) / g.hx
        return (_sumsq(u_dx) + _sumsq(u_dy[:, :-1]) + _sumsq(v_dy) + _sumsq(v_dx[:-1])) * a
    u_dx = (Up[2:-1, 1:-1] - Up[1:-2, 1:-1]) / g.hx
    u_dy = (Up[2:-2, 1:] - Up[2:-2, :-1]) / g.hy  # interior u faces only
    v_dy = (Vp[1:-1, 2:-1] - Vp[1:-1, 1:-2]) / g.hy
    v_dx = (Vp[1:, 2:-2] - Vp[:-1, 2:-2]) / g.hx
    total = _sumsq(u_dx) + _sumsq(v_dy)
    total += _sumsq(u_dy[:, 1:-1]) + 0.5 * (_sumsq(u_dy[:, 0]) + _sumsq(u_dy[:, -1]))
    total += _sumsq(v_dx[1:-1]) + 0.5 * (_sumsq(v_dx[0]) + _sumsq(v_dx[-1]))
    return total * a


NORM_KINDS = ("L2", "H1semi", "H2semi", "Linf")


def norm(field, kind: str = "L2", grid: Grid | None = None, boundary: BoundaryData | None = None) -> float:
    """Discrete norms of cell fields (need ``grid``) or of a :class:`VelocityField`.

    ``H1semi`` uses weighted face differences, ``H2semi`` the L2 norm of the
    five-point Laplacian.  On Dirichlet grids a missing ``boundary`` means a
    zero trace, which is the right choice for differences such as ``d - d_inf``.
    """
    if kind not in NORM_KINDS:
        raise ValueError(f"unknown norm kind {kind!r}")
    if isinstance(field, VelocityField):
        if kind == "L2":
            return float(np.sqrt(velocity_inner(field, field)))
        if kind == "Linf":
            return field.max_abs()
        if kind == "H1semi":
            return float(np.sqrt(velocity_grad_sq(field)))
        lap = velocity_laplacian(field)
        return float(np.sqrt(velocity_inner(lap, lap)))
    if grid is None:
        raise ValueError("cell fields need a grid")
    a = np.asarray(field, dtype=float)
    if a.shape[:2] == (grid.nx + 2, grid.ny + 2):
        P, a = a, a[1:-1, 1:-1]
    else:
        P = None
    if kind == "L2":
        return float(np.sqrt(_sumsq(a) * grid.cell_area))
    if kind == "Linf":
        return float(np.max(np.abs(a))) if a.size else 0.0
    if P is None:
        if grid.bc_mode == "dirichlet" and boundary is None:
            P = _pad_cells(a, grid, "dirichlet", BoundaryData.zeros(grid, a.shape[2:]))
        else:
            P = apply_bc(a, grid, boundary)
    if kind == "H1semi":
        return float(np.sqrt(grad_sq(P, grid)))
    return float(np.sqrt(_sumsq(laplacian(P, grid)) * grid.cell_area))
