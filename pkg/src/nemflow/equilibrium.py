"""Stationary director states, the Lyapunov gap and decay-rate fits."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import stats

from .director import boundary_lift, director_residual, director_step
from .grid import BoundaryData, Grid, VelocityField, norm
from .linalg import NumericalFailure, laplacian_matrix
from .material import Params, Potential, bulk_energy

log = logging.getLogger(__name__)

THETA_FLOOR = 1e-3


class SteadyConvergenceError(NumericalFailure):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class WrongEquilibriumError(ValueError):
    """The reference energy lies above the trajectory: not the limit of this run."""


class InsufficientDataError(ValueError):
    pass


@dataclass
class SteadySolution:
    d_inf: np.ndarray
    residual_norm: float
    iterations: int
    method: str
    energy: float  # 1/2 |grad d|^2 + int F, without the factor lam
    newton_iterations: int = 0
    flow_steps: int = 0

    def total_energy(self, lam: float) -> float:
        """The value the run's total energy tends to (``v = 0``)."""
        return lam * self.energy


def _jacobian(d, grid: Grid, potential: Potential, L0):
    m = d.shape[-1]
    blocks = np.ascontiguousarray(potential.jac(d.reshape(-1, m)))
    n = blocks.shape[0]
    diag = sp.bsr_matrix((blocks, np.arange(n), np.arange(n + 1)), shape=(n * m, n * m))
    return (sp.kron(-L0, sp.identity(m)) + diag).tocsc()


def _residual(d, grid, potential, boundary):
    return director_residual(d, grid, potential, boundary)


def gradient_flow(
    seed,
    grid: Grid,
    boundary: BoundaryData | None,
    potential: Potential,
    t_final: float = 1e3,
    dt: float | None = None,
    max_steps: int | None = None,
    tol: float = 0.0,
):
    """Integrate ``d_tau = Lap d - f(d)`` with the director substep at ``v = 0``.

    Stops at pseudo-time ``t_final``, after ``max_steps`` steps, or once the
    residual drops to ``tol``.  Returns ``(d, steps, residual)``.
    """
    params = Params(nu=1.0, lam=0.0, gamma=1.0, potential=potential)
    if dt is None:
        dt = potential.reaction_dt(1.0)
    vel = VelocityField.zeros(grid)
    d = np.array(seed, dtype=float)
    n_max = int(math.ceil(t_final / dt))
    if max_steps is not None:
        n_max = min(n_max, max_steps)
    res = director_residual(d, grid, potential, boundary)[1]
    steps = 0
    while steps < n_max and res > tol:
        d = director_step(d, vel, dt, params, boundary)
        steps += 1
        if steps % 10 == 0 or steps == n_max:
            res = director_residual(d, grid, potential, boundary)[1]
            if not math.isfinite(res):
                raise NumericalFailure("gradient flow produced non-finite values")
    return d, steps, director_residual(d, grid, potential, boundary)[1]


def solve_steady(
    seed,
    grid: Grid,
    boundary: BoundaryData | None,
    potential: Potential,
    tol: float = 1e-10,
    max_newton: int = 30,
    flow_steps: int = 1000,
    max_restarts: int = 3,
) -> SteadySolution:
    """Damped Newton for ``-Lap d + f(d) = 0`` with gradient-flow fallback.

    The seed's Dirichlet trace is the one held; on Neumann and periodic grids
    the Jacobian has a kernel along the symmetry directions and gets a tiny shift.
    """
    d = np.array(seed, dtype=float)
    if d.ndim != 3 or d.shape[:2] != (grid.nx, grid.ny):
        raise ValueError("seed must have shape (nx, ny, m)")
    if grid.bc_mode == "dirichlet" and (boundary is None or not boundary.matches(grid)):
        raise ValueError("Dirichlet steady problems need boundary data for this grid")
    m = d.shape[-1]
    L0 = laplacian_matrix(grid, "director")
    shift = 0.0 if grid.bc_mode == "dirichlet" else 1e-10 * (4.0 / grid.h**2)
    r, rn = _residual(d, grid, potential, boundary)
    best = (rn, d.copy())
    newton_its = 0
    gf_steps = 0
    used_flow = False
    for restart in range(max_restarts + 1):
        stalled = False
        its = 0
        while rn > tol and its < max_newton:
            J = _jacobian(d, grid, potential, L0)
            if shift:
                J = J + shift * sp.identity(J.shape[0], format="csc")
            try:
                delta = spla.splu(J).solve(-r.ravel())
            except RuntimeError:
                J = J + 1e-8 * sp.identity(J.shape[0], format="csc")
                delta = spla.splu(J).solve(-r.ravel())
            if not np.isfinite(delta).all():
                stalled = True
                break
            delta = delta.reshape(d.shape)
            alpha = 1.0
            while alpha > 1e-6:
                trial = d + alpha * delta
                rt, rtn = _residual(trial, grid, potential, boundary)
                if rtn < rn:
                    break
                alpha *= 0.5
            its += 1
            newton_its += 1
            if alpha <= 1e-6:
                stalled = True
                break
            d, r, rn = trial, rt, rtn
            if not math.isfinite(rn):
                raise NumericalFailure("non-finite residual in Newton iteration")
            if rn < best[0]:
                best = (rn, d.copy())
        if rn <= tol:
            break
        if restart == max_restarts:
            break
        if not stalled and its < max_newton:
            break
        log.info("Newton stalled at residual %.3e, switching to gradient flow", rn)
        used_flow = True
        d, n, rn = gradient_flow(d, grid, boundary, potential, max_steps=flow_steps, tol=tol)
        gf_steps += n
        r, rn = _residual(d, grid, potential, boundary)
        if rn < best[0]:
            best = (rn, d.copy())
    if not rn <= tol:
        raise SteadyConvergenceError(
            f"steady solve did not reach {tol:.1e}; best residual {best[0]:.3e}", best=best
        )
    method = "newton" if not used_flow else ("hybrid" if newton_its else "gradient_flow")
    energy = bulk_energy(d, grid, potential, boundary)
    return SteadySolution(d, rn, newton_its + gf_steps, method, energy, newton_its, gf_steps)


def harmonic_extension(grid: Grid, boundary: BoundaryData, m: int | None = None) -> np.ndarray:
    """Discrete harmonic function with the given Dirichlet trace."""
    m = boundary.m if m is None else m
    L0 = laplacian_matrix(grid, "director").tocsc()
    lift = boundary_lift(grid, boundary, m)
    lu = spla.splu(L0)
    out = np.empty((grid.nx, grid.ny, m))
    for k in range(m):
        out[..., k] = lu.solve(-lift[..., k].ravel()).reshape(grid.nx, grid.ny)
    return out


def distance(d, d_inf, grid: Grid) -> dict:
    """``d - d_inf`` in L2, H1 and the H2 seminorm (the difference has zero trace)."""
    e = np.asarray(d) - np.asarray(d_inf)
    l2 = norm(e, "L2", grid)
    semi = norm(e, "H1semi", grid)
    return {"L2": l2, "H1": math.hypot(l2, semi), "H2semi": norm(e, "H2semi", grid)}


@dataclass
class GapSeries:
    t: np.ndarray
    gap: np.ndarray
    E0: float
    E_inf: float


def lyapunov_gap(records, E_inf: float) -> GapSeries:
    """``total(t) - E_inf`` for a list of records; ``E_inf`` includes the factor lam."""
    t = np.array([r.t for r in records], dtype=float)
    E = np.array([r.total for r in records], dtype=float)
    if t.size == 0:
        raise InsufficientDataError("no records")
    E0 = float(E[0])
    gap = E - E_inf
    scale = max(abs(E0), np.finfo(float).tiny)
    low = float(gap.min())
    if low < -1e-9 * scale:
        raise WrongEquilibriumError(
            f"energy drops {-low:.3e} below the reference equilibrium; it is not this trajectory's limit"
        )
    if low < -1e-12 * scale:
        log.warning("clamping negative gaps down to %.3e", low)
    return GapSeries(t, np.maximum(gap, 0.0), E0, float(E_inf))


@dataclass
class RateFit:
    model: str
    exponent: float
    implied_theta: float
    fit_rms: float
    window: tuple[float, float]
    n_points: int
    exp_rate: float
    exp_rms: float
    alg_beta: float
    alg_rms: float
    target: str = "state"

    def as_dict(self) -> dict:
        return dict(self.__dict__, window=list(self.window))


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    rms = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return coef, rms


def theta_from_beta(beta: float, target: str = "state") -> float:
    """Invert the algebraic rate law.

    ``state`` quantities decay like ``(1+t)^(-theta/(1-2 theta))``; the energy gap
    decays like ``(1+t)^(-1/(1-2 theta))``.
    """
    if target == "state":
        th = beta / (1.0 + 2.0 * beta)
    elif target == "gap":
        th = (beta - 1.0) / (2.0 * beta) if beta > 0 else 0.0
    else:
        raise ValueError(f"unknown target {target!r}")
    return float(min(max(th, THETA_FLOOR), 0.5))


def fit_decay(t, y, window=None, target: str = "state", min_points: int = 20, floor: float = 0.0) -> RateFit:
    """Fit ``y ~ C e^(-kappa t)`` and ``y ~ C (1+t)^(-beta)``; keep the one with lower log-RMS.

    Samples at or below ``floor`` (roundoff level) are dropped before fitting.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    sel = np.isfinite(t) & np.isfinite(y) & (y > max(floor, 0.0))
    if window is not None:
        lo, hi = window
        sel &= (t >= lo) & (t <= hi)
    t, y = t[sel], y[sel]
    if t.size < min_points:
        raise InsufficientDataError(f"insufficient points: {t.size} positive samples in window, need {min_points}")
    ly = np.log(y)
    if np.ptp(ly) <= 1e-12 * max(1.0, float(np.max(np.abs(ly)))):
        raise InsufficientDataError("degenerate series: no decay to fit")
    (ke, _), rms_e = _linfit(t, ly)
    (kb, _), rms_a = _linfit(np.log1p(t), ly)
    kappa, beta = -float(ke), -float(kb)
    if kappa <= 0 and beta <= 0:
        raise InsufficientDataError("series does not decay over the window")
    if rms_e <= rms_a:
        model, expo, theta, rms = "exponential", kappa, 0.5, rms_e
    else:
        model, expo, theta, rms = "algebraic", beta, theta_from_beta(beta, target), rms_a
    return RateFit(
        model, expo, theta, rms, (float(t[0]), float(t[-1])), int(t.size),
        kappa, rms_e, beta, rms_a, target,
    )


@dataclass
class ThetaEstimate:
    theta: float
    ci: tuple[float, float]
    slope: float
    slope_stderr: float
    rms: float
    window: tuple[float, float]
    n_points: int
    noise_floor: float

    def as_dict(self) -> dict:
        return dict(self.__dict__, ci=list(self.ci), window=list(self.window))


def estimate_theta(gap: GapSeries, window=None, noise_floor: float | None = None, confidence: float = 0.95):
    """Slope ``s`` of ``log(-g')`` against ``log g``; ``theta = 1 - s/2``.

    ``g'`` comes from centred differences of the record series.  Samples below
    100 times the noise floor (default ``1e-14 E(0)``) are left out.
    """
    t, g = np.asarray(gap.t, float), np.asarray(gap.gap, float)
    if t.size < 3:
        raise InsufficientDataError("need at least three gap samples")
    if noise_floor is None:
        noise_floor = 1e-14 * max(abs(gap.E0), np.finfo(float).tiny)
    dg = np.gradient(g, t)
    idx = np.arange(1, t.size - 1)  # interior points only, for centred differences
    keep = g[idx] > 100.0 * noise_floor
    # the neighbours feed the difference, so they must be above the floor too
    keep &= g[idx + 1] > 100.0 * noise_floor
    if window is not None:
        keep &= (t[idx] >= window[0]) & (t[idx] <= window[1])
    idx = idx[keep]
    if idx.size < 3:
        raise InsufficientDataError(f"insufficient points above the noise floor: {idx.size}")
    rate = -dg[idx]
    if np.any(rate <= 0):
        bad = t[idx[rate <= 0][0]]
        raise ValueError(f"gap is not decreasing in the fit window (first at t={bad:.6g})")
    x, y = np.log(g[idx]), np.log(rate)
    res = stats.linregress(x, y)
    s = float(res.slope)
    rms = float(np.sqrt(np.mean((res.intercept + s * x - y) ** 2)))
    if idx.size > 2:
        q = stats.t.ppf(0.5 + confidence / 2, idx.size - 2)
        half = float(q * res.stderr)
    else:
        half = math.inf
    clamp = lambda th: float(min(max(th, THETA_FLOOR), 0.5))  # noqa: E731
    return ThetaEstimate(
        theta=clamp(1.0 - s / 2.0),
        ci=(clamp(1.0 - (s + half) / 2.0), clamp(1.0 - (s - half) / 2.0)),
        slope=s,
        slope_stderr=float(res.stderr),
        rms=rms,
        window=(float(t[idx[0]]), float(t[idx[-1]])),
        n_points=int(idx.size),
        noise_floor=float(noise_floor),
    )
