"""Sparse matrices for the implicit substeps and cached factorizations.

Every matrix here is the exact matrix of the corresponding stencil in
:mod:`nemflow.grid` (with homogeneous ghosts), so solving with it and then
evaluating the stencil gives back the right-hand side to roundoff.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid


class NumericalFailure(RuntimeError):
    """A step or solve produced non-finite values or failed to converge."""


class LinearSolveError(NumericalFailure):
    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class LinearSolveConfig:
    """``method`` is ``"direct"`` (sparse LU plus iterative refinement) or ``"cg"``."""

    rel_tol: float = 1e-10
    max_iterations: int = 500
    method: str = "direct"

    def __post_init__(self):
        if not 0 < self.rel_tol <= 1e-4:
            raise ValueError("rel_tol must lie in (0, 1e-4]")
        if self.method not in ("direct", "cg"):
            raise ValueError(f"unknown linear solver method {self.method!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


def second_difference(n: int, h: float, kind: str) -> sp.csr_matrix:
    """1-D second-difference matrix.

    ``cell_odd``: cell unknowns, ghost = -interior (homogeneous Dirichlet)
    ``cell_even``: cell unknowns, ghost = interior (homogeneous Neumann)
    ``face``: the n-1 interior face unknowns between fixed zero end faces
    ``periodic``: n unknowns on a ring
    """
    if kind == "face":
        n = n - 1
    main = -2.0 * np.ones(n)
    off = np.ones(n - 1)
    if kind == "cell_odd":
        main[0] = main[-1] = -3.0
    elif kind == "cell_even":
        main[0] = main[-1] = -1.0
    A = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if kind == "periodic":
        A[0, n - 1] += 1.0
        A[n - 1, 0] += 1.0
    elif kind not in ("cell_odd", "cell_even", "face"):
        raise ValueError(kind)
    return (A / h**2).tocsr()


def _kinds(grid: Grid, component: str):
    """1-D operator kinds (x, y) for each staggered variable."""
    if grid.periodic:
        return "periodic", "periodic"
    tangential = "cell_odd" if grid.bc_mode == "dirichlet" else "cell_even"
    if component == "u":
        return "face", tangential
    if component == "v":
        return tangential, "face"
    if component == "pressure":
        return "cell_even", "cell_even"
    if component == "director":
        k = "cell_odd" if grid.bc_mode == "dirichlet" else "cell_even"
        return k, k
    raise ValueError(component)


def _sizes(grid: Grid, kx: str, ky: str):
    nx = grid.nx - 1 if kx == "face" else grid.nx
    ny = grid.ny - 1 if ky == "face" else grid.ny
    return nx, ny


@lru_cache(maxsize=64)
def laplacian_matrix(grid: Grid, component: str) -> sp.csr_matrix:
    kx, ky = _kinds(grid, component)
    Ax = second_difference(grid.nx, grid.hx, kx)
    Ay = second_difference(grid.ny, grid.hy, ky)
    nx, ny = _sizes(grid, kx, ky)
    return (sp.kron(Ax, sp.identity(ny)) + sp.kron(sp.identity(nx), Ay)).tocsr()


def unknowns(grid: Grid, component: str, arr):
    """View of the unknown entries of a face/cell array for ``component``."""
    if grid.periodic:
        if component == "u":
            return arr[:-1]
        if component == "v":
            return arr[:, :-1]
        return arr
    if component == "u":
        return arr[1:-1]
    if component == "v":
        return arr[:, 1:-1]
    return arr


class _Factorized:
    """Solve ``A x = b`` for one fixed SPD-like matrix."""

    def __init__(self, A: sp.csr_matrix, config: LinearSolveConfig, singular: bool = False):
        self.A = A
        self.config = config
        self.singular = singular
        if config.method == "direct":
            M = A.tolil(copy=True)
            if singular:
                # pin the first unknown; callers supply compatible data and fix the gauge
                M[0, :] = 0.0
                M[0, 0] = 1.0
            self.lu = spla.splu(M.tocsc())

    def _direct(self, b):
        if self.singular:
            b = b.copy()
            b[0] = 0.0
        return self.lu.solve(b)

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if not np.isfinite(b).all():
            raise NumericalFailure("non-finite right-hand side")
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros_like(b)
        cfg = self.config
        if cfg.method == "cg":
            # the negated operators are symmetric positive (semi)definite
            x, info = spla.cg(-self.A, -b, rtol=cfg.rel_tol, atol=0.0, maxiter=cfg.max_iterations)
            if self.singular:
                x -= x.mean()
            res = np.linalg.norm(b - self.A @ x) / bnorm
            if info != 0 or res > cfg.rel_tol * 10:
                raise LinearSolveError("conjugate gradients did not converge", res)
            return x
        x = self._direct(b)
        if self.singular:
            x -= x.mean()
        res = np.linalg.norm(b - self.A @ x) / bnorm
        it = 0
        while res > cfg.rel_tol and it < cfg.max_iterations:
            dx = self._direct(b - self.A @ x)
            if self.singular:
                dx -= dx.mean()
            x = x + dx
            new = np.linalg.norm(b - self.A @ x) / bnorm
            it += 1
            if new >= res:
                res = new
                break
            res = new
        if res > cfg.rel_tol:
            raise LinearSolveError("direct solve did not reach the requested tolerance", res)
        return x


@lru_cache(maxsize=64)
def helmholtz_solver(grid: Grid, component: str, coeff: float, config: LinearSolveConfig = LinearSolveConfig()):
    """Factorized ``I - coeff * Laplacian`` for one staggered variable."""
    L = laplacian_matrix(grid, component)
    A = (sp.identity(L.shape[0]) - coeff * L).tocsr()
    if config.method == "cg":
        # I - cL is SPD; cg on -(A) would be negative definite
        return _SPDWrapper(A, config)
    return _Factorized(A, config)


class _SPDWrapper(_Factorized):
    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if not np.isfinite(b).all():
            raise NumericalFailure("non-finite right-hand side")
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros_like(b)
        x, info = spla.cg(self.A, b, rtol=self.config.rel_tol, atol=0.0, maxiter=self.config.max_iterations)
        res = np.linalg.norm(b - self.A @ x) / bnorm
        if info != 0 or res > self.config.rel_tol * 10:
            raise LinearSolveError("conjugate gradients did not converge", res)
        return x


@lru_cache(maxsize=16)
def poisson_solver(grid: Grid, config: LinearSolveConfig = LinearSolveConfig()):
    """Pressure Laplacian (Neumann walls or periodic), zero-mean gauge."""
    return _Factorized(laplacian_matrix(grid, "pressure"), config, singular=True)
